#include "mfdsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mfdsim/csv.hpp"
#include "mfdsim/errors.hpp"

namespace mfdsim {

int Segment::storage() const {
  return std::max(1, static_cast<int>(std::floor(jam_total() * length_km() + 1e-9)));
}

double speed_from_density(const Segment& segment, double density_veh_km) {
  const double k = std::max(0.0, density_veh_km);
  const double ratio = std::min(1.0, k / segment.jam_total());
  if (ratio <= 0.0) return segment.free_flow_kmh;
  const double v = segment.free_flow_kmh *
                   std::pow(1.0 - std::pow(ratio, segment.alpha), segment.beta);
  return std::max(segment.min_speed_kmh, v);
}

std::size_t Network::node_index(NodeId id) const {
  auto it = node_ix_.find(id);
  if (it == node_ix_.end()) throw DomainError("unknown node " + std::to_string(id));
  return it->second;
}

std::size_t Network::link_index(LinkId id) const {
  auto it = link_ix_.find(id);
  if (it == link_ix_.end()) throw DomainError("unknown link " + std::to_string(id));
  return it->second;
}

std::size_t Network::segment_index(SegmentId id) const {
  auto it = seg_ix_.find(id);
  if (it == seg_ix_.end()) throw DomainError("unknown segment " + std::to_string(id));
  return it->second;
}

std::size_t Network::zone_index(ZoneId id) const {
  auto it = zone_ix_.find(id);
  if (it == zone_ix_.end()) throw DomainError("unknown zone " + std::to_string(id));
  return it->second;
}

ZoneId Network::zone_of(NodeId node) const {
  auto it = node_zone_.find(node);
  return it == node_zone_.end() ? -1 : it->second;
}

double Network::link_length_m(std::size_t link_ix) const {
  double len = 0.0;
  for (auto s : links_[link_ix].segments) len += segments_[s].length_m;
  return len;
}

double Network::link_free_flow_s(std::size_t link_ix) const {
  double t = 0.0;
  for (auto s : links_[link_ix].segments) t += segments_[s].free_flow_time_s();
  return t;
}

double Network::euclidean_m(NodeId a, NodeId b) const {
  const auto& na = nodes_[node_index(a)];
  const auto& nb = nodes_[node_index(b)];
  return std::hypot(na.x_m - nb.x_m, na.y_m - nb.y_m);
}

NetworkBuilder& NetworkBuilder::add_node(Node node) {
  nodes_.push_back(node);
  return *this;
}

NetworkBuilder& NetworkBuilder::add_link(LinkId id, NodeId from, NodeId to) {
  links_.push_back(Link{id, from, to, {}});
  return *this;
}

NetworkBuilder& NetworkBuilder::add_segment(Segment segment) {
  segments_.push_back(segment);
  return *this;
}

NetworkBuilder& NetworkBuilder::add_zone(Zone zone) {
  zones_.push_back(std::move(zone));
  return *this;
}

Network NetworkBuilder::build() const {
  Network net;
  net.nodes_ = nodes_;
  net.links_ = links_;
  net.segments_ = segments_;
  net.zones_ = zones_;
  for (std::size_t i = 0; i < net.nodes_.size(); ++i) net.node_ix_.emplace(net.nodes_[i].id, i);
  for (std::size_t i = 0; i < net.links_.size(); ++i) net.link_ix_.emplace(net.links_[i].id, i);
  for (std::size_t i = 0; i < net.segments_.size(); ++i) net.seg_ix_.emplace(net.segments_[i].id, i);
  for (std::size_t i = 0; i < net.zones_.size(); ++i) {
    net.zone_ix_.emplace(net.zones_[i].id, i);
    for (auto n : net.zones_[i].nodes) net.node_zone_.emplace(n, net.zones_[i].id);
  }

  net.seg_link_.assign(net.segments_.size(), static_cast<std::size_t>(-1));
  net.seg_pos_.assign(net.segments_.size(), 0);
  for (std::size_t s = 0; s < net.segments_.size(); ++s) {
    auto it = net.link_ix_.find(net.segments_[s].link_id);
    if (it == net.link_ix_.end()) continue;  // reported by validate_network
    auto& link = net.links_[it->second];
    net.seg_pos_[s] = link.segments.size();
    net.seg_link_[s] = it->second;
    link.segments.push_back(s);
  }

  net.out_.assign(net.nodes_.size(), {});
  net.in_.assign(net.nodes_.size(), {});
  for (std::size_t l = 0; l < net.links_.size(); ++l) {
    auto f = net.node_ix_.find(net.links_[l].from);
    auto t = net.node_ix_.find(net.links_[l].to);
    if (f != net.node_ix_.end()) net.out_[f->second].push_back(l);
    if (t != net.node_ix_.end()) net.in_[t->second].push_back(l);
  }
  return net;
}

double network_total_length(const Network& network) {
  // Sorted summation keeps the result independent of segment ordering.
  std::vector<double> lengths;
  lengths.reserve(network.segments().size());
  for (const auto& s : network.segments()) lengths.push_back(s.length_m);
  std::sort(lengths.begin(), lengths.end());
  double total = 0.0;
  for (double l : lengths) total += l;
  return total / 1000.0;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

std::string seg_label(const Segment& s) { return "segment " + std::to_string(s.id); }

}  // namespace

ValidationReport validate_network(const Network& network) {
  ValidationReport report;
  auto& v = report.violations;

  if (network.nodes().empty()) v.push_back("network has no nodes");

  {
    std::vector<NodeId> ids;
    for (const auto& n : network.nodes()) ids.push_back(n.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) v.push_back("duplicate node id");
    std::vector<LinkId> lids;
    for (const auto& l : network.links()) lids.push_back(l.id);
    std::sort(lids.begin(), lids.end());
    if (std::adjacent_find(lids.begin(), lids.end()) != lids.end()) v.push_back("duplicate link id");
    std::vector<SegmentId> sids;
    for (const auto& s : network.segments()) sids.push_back(s.id);
    std::sort(sids.begin(), sids.end());
    if (std::adjacent_find(sids.begin(), sids.end()) != sids.end()) v.push_back("duplicate segment id");
  }

  for (const auto& s : network.segments()) {
    if (!(s.length_m > 0.0)) v.push_back(seg_label(s) + ": length must be > 0");
    if (s.lanes < 1) v.push_back(seg_label(s) + ": lane_count must be >= 1");
    if (!(s.capacity_veh_h > 0.0)) v.push_back(seg_label(s) + ": output_capacity must be > 0");
    if (!(s.min_speed_kmh > 0.0 && s.min_speed_kmh < s.free_flow_kmh))
      v.push_back(seg_label(s) + ": need 0 < min_speed < free_flow_speed");
    if (!(s.jam_density > 0.0)) v.push_back(seg_label(s) + ": jam_density must be > 0");
    if (!(s.alpha > 0.0) || !(s.beta > 0.0)) v.push_back(seg_label(s) + ": alpha and beta must be > 0");
  }
  for (std::size_t s = 0; s < network.segments().size(); ++s) {
    if (network.segment_link(s) == static_cast<std::size_t>(-1))
      v.push_back(seg_label(network.segments()[s]) + ": unknown link " +
                  std::to_string(network.segments()[s].link_id));
  }

  for (const auto& l : network.links()) {
    const std::string label = "link " + std::to_string(l.id);
    if (!network.has_node(l.from) || !network.has_node(l.to)) v.push_back(label + ": unknown end node");
    if (l.from == l.to) v.push_back(label + ": self loop");
    if (l.segments.empty()) v.push_back(label + ": has no segments");
  }

  for (const auto& z : network.zones()) {
    const std::string label = "zone " + std::to_string(z.id);
    if (!(z.demand_weight >= 0.0)) v.push_back(label + ": demand_weight must be >= 0");
    if (z.nodes.empty()) v.push_back(label + ": has no member nodes");
    for (auto n : z.nodes)
      if (!network.has_node(n)) v.push_back(label + ": unknown member node " + std::to_string(n));
    if (!network.has_node(z.centroid)) v.push_back(label + ": unknown centroid node");
  }

  if (!network.nodes().empty()) {
    UnionFind uf(network.nodes().size());
    for (const auto& l : network.links()) {
      if (network.has_node(l.from) && network.has_node(l.to))
        uf.unite(network.node_index(l.from), network.node_index(l.to));
    }
    const auto root = uf.find(0);
    std::size_t stray = 0;
    for (std::size_t i = 1; i < network.nodes().size(); ++i)
      if (uf.find(i) != root) ++stray;
    if (stray > 0)
      v.push_back("graph is not weakly connected (" + std::to_string(stray) +
                  " nodes outside the first component)");
  }
  return report;
}

namespace {

double need_double(const csv::Reader& r, const std::string& f, const char* col) {
  auto v = csv::to_double(f);
  if (!v) throw ParseError(r.name(), r.line(), std::string("bad number in column ") + col);
  return *v;
}

std::int64_t need_int(const csv::Reader& r, const std::string& f, const char* col) {
  auto v = csv::to_int(f);
  if (!v) throw ParseError(r.name(), r.line(), std::string("bad integer in column ") + col);
  return *v;
}

void need_width(const csv::Reader& r, const std::vector<std::string>& row, std::size_t n) {
  if (row.size() != n)
    throw ParseError(r.name(), r.line(),
                     "expected " + std::to_string(n) + " fields, got " + std::to_string(row.size()));
}

}  // namespace

Network load_network_csv(const std::filesystem::path& dir) {
  NetworkBuilder b;
  std::vector<std::string> row;
  {
    csv::Reader r(dir / "nodes.csv");
    r.expect_header({"id", "x_m", "y_m"});
    while (r.next(row)) {
      need_width(r, row, 3);
      b.add_node({need_int(r, row[0], "id"), need_double(r, row[1], "x_m"), need_double(r, row[2], "y_m")});
    }
  }
  {
    csv::Reader r(dir / "links.csv");
    r.expect_header({"id", "from_node", "to_node"});
    while (r.next(row)) {
      need_width(r, row, 3);
      b.add_link(need_int(r, row[0], "id"), need_int(r, row[1], "from_node"), need_int(r, row[2], "to_node"));
    }
  }
  {
    csv::Reader r(dir / "segments.csv");
    r.expect_header({"id", "link_id", "length_m", "lanes", "v_f_kmh", "k_jam_veh_km_lane", "cap_veh_h",
                     "alpha", "beta", "min_speed_kmh"});
    while (r.next(row)) {
      need_width(r, row, 10);
      Segment s;
      s.id = need_int(r, row[0], "id");
      s.link_id = need_int(r, row[1], "link_id");
      s.length_m = need_double(r, row[2], "length_m");
      s.lanes = static_cast<int>(need_int(r, row[3], "lanes"));
      s.free_flow_kmh = need_double(r, row[4], "v_f_kmh");
      s.jam_density = need_double(r, row[5], "k_jam_veh_km_lane");
      s.capacity_veh_h = need_double(r, row[6], "cap_veh_h");
      s.alpha = need_double(r, row[7], "alpha");
      s.beta = need_double(r, row[8], "beta");
      s.min_speed_kmh = need_double(r, row[9], "min_speed_kmh");
      b.add_segment(s);
    }
  }
  if (std::filesystem::exists(dir / "zones.csv")) {
    csv::Reader r(dir / "zones.csv");
    r.expect_header({"id", "centroid_node", "demand_weight", "nodes"});
    while (r.next(row)) {
      need_width(r, row, 4);
      Zone z;
      z.id = need_int(r, row[0], "id");
      z.centroid = need_int(r, row[1], "centroid_node");
      z.demand_weight = need_double(r, row[2], "demand_weight");
      for (const auto& n : csv::split(row[3], ';')) z.nodes.push_back(need_int(r, n, "nodes"));
      b.add_zone(std::move(z));
    }
  }
  return b.build();
}

void write_network_csv(const Network& network, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    csv::Writer w(dir / "nodes.csv");
    w.row({"id", "x_m", "y_m"});
    for (const auto& n : network.nodes()) w.row({csv::fmt(n.id), csv::fmt(n.x_m), csv::fmt(n.y_m)});
  }
  {
    csv::Writer w(dir / "links.csv");
    w.row({"id", "from_node", "to_node"});
    for (const auto& l : network.links()) w.row({csv::fmt(l.id), csv::fmt(l.from), csv::fmt(l.to)});
  }
  {
    csv::Writer w(dir / "segments.csv");
    w.row({"id", "link_id", "length_m", "lanes", "v_f_kmh", "k_jam_veh_km_lane", "cap_veh_h", "alpha", "beta",
           "min_speed_kmh"});
    for (const auto& s : network.segments())
      w.row({csv::fmt(s.id), csv::fmt(s.link_id), csv::fmt(s.length_m), csv::fmt(std::int64_t{s.lanes}),
             csv::fmt(s.free_flow_kmh), csv::fmt(s.jam_density), csv::fmt(s.capacity_veh_h), csv::fmt(s.alpha),
             csv::fmt(s.beta), csv::fmt(s.min_speed_kmh)});
  }
  if (!network.zones().empty()) {
    csv::Writer w(dir / "zones.csv");
    w.row({"id", "centroid_node", "demand_weight", "nodes"});
    for (const auto& z : network.zones()) {
      std::string nodes;
      for (auto n : z.nodes) nodes += (nodes.empty() ? "" : ";") + csv::fmt(n);
      w.row({csv::fmt(z.id), csv::fmt(z.centroid), csv::fmt(z.demand_weight), nodes});
    }
  }
}

Network make_grid_network(const GridSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1 || spec.rows * spec.cols < 2)
    throw DomainError("grid needs at least two nodes");
  if (spec.segments_per_link < 1) throw DomainError("segments_per_link must be >= 1");
  NetworkBuilder b;
  auto node_id = [&](int r, int c) { return static_cast<NodeId>(r * spec.cols + c); };
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) b.add_node({node_id(r, c), c * spec.spacing_m, r * spec.spacing_m});

  LinkId next_link = 0;
  auto add = [&](NodeId from, NodeId to) {
    const LinkId id = next_link++;
    b.add_link(id, from, to);
    for (int k = 0; k < spec.segments_per_link; ++k) {
      Segment s;
      s.id = id * spec.segments_per_link + k;
      s.link_id = id;
      s.length_m = spec.spacing_m / spec.segments_per_link;
      s.lanes = spec.lanes;
      s.free_flow_kmh = spec.free_flow_kmh;
      s.jam_density = spec.jam_density;
      s.capacity_veh_h = spec.capacity_veh_h;
      s.alpha = spec.alpha;
      s.beta = spec.beta;
      s.min_speed_kmh = spec.min_speed_kmh;
      b.add_segment(s);
    }
  };
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      if (c + 1 < spec.cols) {
        add(node_id(r, c), node_id(r, c + 1));
        add(node_id(r, c + 1), node_id(r, c));
      }
      if (r + 1 < spec.rows) {
        add(node_id(r, c), node_id(r + 1, c));
        add(node_id(r + 1, c), node_id(r, c));
      }
    }
  }

  const int blk = std::max(1, spec.zone_block);
  ZoneId zid = 0;
  for (int r0 = 0; r0 < spec.rows; r0 += blk) {
    for (int c0 = 0; c0 < spec.cols; c0 += blk) {
      Zone z;
      z.id = zid++;
      for (int r = r0; r < std::min(spec.rows, r0 + blk); ++r)
        for (int c = c0; c < std::min(spec.cols, c0 + blk); ++c) z.nodes.push_back(node_id(r, c));
      const int rc = std::min(spec.rows - 1, r0 + (std::min(spec.rows, r0 + blk) - r0 - 1) / 2);
      const int cc = std::min(spec.cols - 1, c0 + (std::min(spec.cols, c0 + blk) - c0 - 1) / 2);
      z.centroid = node_id(rc, cc);
      z.demand_weight = 1.0;
      b.add_zone(std::move(z));
    }
  }
  return b.build();
}

}  // namespace mfdsim
