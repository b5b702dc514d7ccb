#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netens/errors.hpp"

namespace netens {

// Undirected, no self-loops. Nodes are 0-based. Hard cap of 64 nodes so
// neighbourhoods fit in one word and degree / common-neighbour counts are
// popcounts.
inline constexpr int max_nodes = 64;

enum class MaskState : uint8_t { ObservedPresent, ObservedAbsent, Missing };

struct Dyad {
  int i = 0; // always i < j after normalization
  int j = 0;
  friend bool operator==(const Dyad&, const Dyad&) = default;
};

// Normalizes order; rejects loops and negative ids.
Dyad make_dyad(int i, int j);

// One node attribute: either a real column or an interned categorical one.
struct AttributeColumn {
  bool categorical = false;
  std::vector<double> reals;        // !categorical: value per node
  std::vector<int> codes;           // categorical: level code per node
  std::vector<std::string> levels;  // code -> label

  const std::string& label_of(int node) const { return levels[codes[node]]; }
  // -1 when the label is not a level of this column
  int code_of(const std::string& label) const;
};

class Network {
public:
  Network() = default;
  Network(int n, std::string net_id);

  int node_count() const { return n_; }
  int dyad_count() const { return n_ * (n_ - 1) / 2; }
  const std::string& id() const { return id_; }

  // row-major upper-triangle index of a dyad
  int dyad_index(Dyad d) const;
  Dyad dyad_at(int idx) const;

  bool has_edge(int i, int j) const { return (nbr_[i] >> j) & 1u; }
  bool has_edge(Dyad d) const { return has_edge(d.i, d.j); }
  int degree(int i) const { return std::popcount(nbr_[check_node(i)]); }
  int common_neighbors(int i, int j) const;
  uint64_t neighbor_mask(int i) const { return nbr_[check_node(i)]; }
  int edge_count() const { return edges_; }
  std::vector<Dyad> edges() const;

  // Flips the dyad's adjacency; returns its new state. Toggling twice
  // restores everything. Masks are not consulted: samplers own the policy
  // of which dyads they touch.
  bool toggle(Dyad d);
  void set_edge(Dyad d, bool present);

  MaskState mask(Dyad d) const { return mask_[dyad_index(d)]; }
  void set_mask(Dyad d, MaskState m);
  // Marks every dyad not incident to `node` as Missing (egocentric view).
  void apply_egocentric_mask(int node);

  bool fully_observed() const { return missing_ == 0; }
  int missing_count() const { return missing_; }
  const std::vector<Dyad>& missing_dyads() const;
  std::vector<Dyad> observed_dyads() const;

  // Checks mask/adjacency coherence: ObservedPresent dyads carry an edge,
  // ObservedAbsent dyads do not. Missing dyads may hold any imputed value.
  void check_consistent() const;

  void set_real_attr(const std::string& name, std::vector<double> values);
  void set_categorical_attr(const std::string& name, const std::vector<std::string>& values);
  const AttributeColumn* find_attr(const std::string& name) const;
  const std::map<std::string, AttributeColumn>& attrs() const { return attrs_; }

private:
  int check_node(int i) const;

  int n_ = 0;
  std::string id_;
  std::vector<uint64_t> nbr_;      // neighbour mask per node
  std::vector<MaskState> mask_;    // per dyad, row-major upper triangle
  int edges_ = 0;
  int missing_ = 0;
  mutable std::vector<Dyad> missing_cache_;
  mutable bool missing_dirty_ = true;
  std::map<std::string, AttributeColumn> attrs_;
};

struct DyadMaskSummary {
  std::vector<Dyad> missing;   // unknown dyads (the "free" ones a conditional sampler may move)
  std::vector<Dyad> observed;  // fixed dyads
};

DyadMaskSummary mask_summary(const Network& net);

} // namespace netens
