#include "netens/network.hpp"

#include <algorithm>

#include "netens/util.hpp"

namespace netens {

Dyad make_dyad(int i, int j) {
  if (i == j) throw structural_error(strf("dyad (%d,%d): self-loops are not dyads", i, j));
  if (i < 0 || j < 0) throw structural_error(strf("dyad (%d,%d): negative node id", i, j));
  if (i > j) std::swap(i, j);
  return Dyad{i, j};
}

int AttributeColumn::code_of(const std::string& label) const {
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (levels[k] == label) return static_cast<int>(k);
  return -1;
}

Network::Network(int n, std::string net_id) : n_(n), id_(std::move(net_id)) {
  if (n < 1) throw data_error(strf("network '%s': node count %d < 1", id_.c_str(), n));
  if (n > max_nodes)
    throw data_error(strf("network '%s': node count %d exceeds supported maximum %d", id_.c_str(), n, max_nodes));
  nbr_.assign(n, 0);
  mask_.assign(static_cast<std::size_t>(dyad_count()), MaskState::ObservedAbsent);
}

int Network::check_node(int i) const {
  if (i < 0 || i >= n_) throw structural_error(strf("network '%s': node %d out of range [0,%d)", id_.c_str(), i, n_));
  return i;
}

int Network::dyad_index(Dyad d) const {
  check_node(d.i);
  check_node(d.j);
  if (d.i >= d.j) throw structural_error("dyad_index: dyad not normalized");
  return d.i * (2 * n_ - d.i - 1) / 2 + (d.j - d.i - 1);
}

Dyad Network::dyad_at(int idx) const {
  if (idx < 0 || idx >= dyad_count()) throw structural_error(strf("dyad index %d out of range", idx));
  int i = 0;
  int row = n_ - 1; // dyads in row i
  int k = idx;
  while (k >= row) {
    k -= row;
    --row;
    ++i;
  }
  return Dyad{i, i + 1 + k};
}

int Network::common_neighbors(int i, int j) const {
  check_node(i);
  check_node(j);
  if (i == j) throw structural_error("common_neighbors: i == j");
  return std::popcount(nbr_[i] & nbr_[j]);
}

std::vector<Dyad> Network::edges() const {
  std::vector<Dyad> out;
  out.reserve(static_cast<std::size_t>(edges_));
  for (int i = 0; i < n_; ++i) {
    uint64_t rest = nbr_[i] >> (i + 1) << (i + 1); // neighbours with id > i
    while (rest) {
      const int j = std::countr_zero(rest);
      rest &= rest - 1;
      out.push_back(Dyad{i, j});
    }
  }
  return out;
}

bool Network::toggle(Dyad d) {
  dyad_index(d); // validates
  const uint64_t bi = uint64_t{1} << d.j;
  const uint64_t bj = uint64_t{1} << d.i;
  const bool now = !((nbr_[d.i] >> d.j) & 1u);
  nbr_[d.i] ^= bi;
  nbr_[d.j] ^= bj;
  edges_ += now ? 1 : -1;
  return now;
}

void Network::set_edge(Dyad d, bool present) {
  if (has_edge(d) != present) toggle(d);
}

void Network::set_mask(Dyad d, MaskState m) {
  MaskState& slot = mask_[dyad_index(d)];
  if (slot == m) return;
  if (slot == MaskState::Missing) --missing_;
  if (m == MaskState::Missing) ++missing_;
  slot = m;
  missing_dirty_ = true;
}

void Network::apply_egocentric_mask(int node) {
  check_node(node);
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (i != node && j != node) set_mask(Dyad{i, j}, MaskState::Missing);
}

const std::vector<Dyad>& Network::missing_dyads() const {
  if (missing_dirty_) {
    missing_cache_.clear();
    for (int idx = 0; idx < dyad_count(); ++idx)
      if (mask_[idx] == MaskState::Missing) missing_cache_.push_back(dyad_at(idx));
    missing_dirty_ = false;
  }
  return missing_cache_;
}

std::vector<Dyad> Network::observed_dyads() const {
  std::vector<Dyad> out;
  out.reserve(static_cast<std::size_t>(dyad_count() - missing_));
  for (int idx = 0; idx < dyad_count(); ++idx)
    if (mask_[idx] != MaskState::Missing) out.push_back(dyad_at(idx));
  return out;
}

void Network::check_consistent() const {
  for (int idx = 0; idx < dyad_count(); ++idx) {
    const Dyad d = dyad_at(idx);
    const bool present = has_edge(d);
    if (mask_[idx] == MaskState::ObservedPresent && !present)
      throw data_error(strf("network '%s': dyad (%d,%d) marked observed-present but absent", id_.c_str(), d.i, d.j));
    if (mask_[idx] == MaskState::ObservedAbsent && present)
      throw data_error(strf("network '%s': dyad (%d,%d) marked observed-absent but present", id_.c_str(), d.i, d.j));
  }
}

void Network::set_real_attr(const std::string& name, std::vector<double> values) {
  if (static_cast<int>(values.size()) != n_)
    throw data_error(strf("network '%s': attribute '%s' has %zu values for %d nodes", id_.c_str(), name.c_str(),
                          values.size(), n_));
  AttributeColumn col;
  col.categorical = false;
  col.reals = std::move(values);
  attrs_[name] = std::move(col);
}

void Network::set_categorical_attr(const std::string& name, const std::vector<std::string>& values) {
  if (static_cast<int>(values.size()) != n_)
    throw data_error(strf("network '%s': attribute '%s' has %zu values for %d nodes", id_.c_str(), name.c_str(),
                          values.size(), n_));
  AttributeColumn col;
  col.categorical = true;
  col.codes.reserve(values.size());
  for (const auto& v : values) {
    int code = col.code_of(v);
    if (code < 0) {
      code = static_cast<int>(col.levels.size());
      col.levels.push_back(v);
    }
    col.codes.push_back(code);
  }
  attrs_[name] = std::move(col);
}

const AttributeColumn* Network::find_attr(const std::string& name) const {
  auto it = attrs_.find(name);
  return it == attrs_.end() ? nullptr : &it->second;
}

DyadMaskSummary mask_summary(const Network& net) {
  DyadMaskSummary s;
  s.missing = net.missing_dyads();
  s.observed = net.observed_dyads();
  return s;
}

} // namespace netens
