#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace mfdsim {

using NodeId = std::int64_t;
using LinkId = std::int64_t;
using SegmentId = std::int64_t;
using ZoneId = std::int64_t;

struct Node {
  NodeId id = 0;
  double x_m = 0.0;
  double y_m = 0.0;
};

/// Directed road link. Its segments are listed in travel order.
struct Link {
  LinkId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  std::vector<std::size_t> segments;  // indices into Network::segments()
};

struct Segment {
  SegmentId id = 0;
  LinkId link_id = 0;
  double length_m = 0.0;
  int lanes = 1;
  double free_flow_kmh = 60.0;
  double jam_density = 150.0;  // veh/km per lane
  double capacity_veh_h = 1800.0;
  double alpha = 1.0;
  double beta = 1.5;
  double min_speed_kmh = 5.0;

  double length_km() const { return length_m / 1000.0; }
  double jam_total() const { return jam_density * lanes; }
  /// Vehicles the segment can store at jam density (at least one).
  int storage() const;
  double free_flow_time_s() const { return length_m / (free_flow_kmh / 3.6); }
};

struct Zone {
  ZoneId id = 0;
  std::vector<NodeId> nodes;
  NodeId centroid = 0;
  double demand_weight = 1.0;
};

/// Modified-Greenshields speed-density curve with a floor speed:
/// v = max(v_min, v_f * (1 - min(1, k / k_jam)^alpha)^beta), k in veh/km.
double speed_from_density(const Segment& segment, double density_veh_km);

/// Immutable road network. Built once via NetworkBuilder or a loader; all
/// lookups afterwards are read-only.
class Network {
 public:
  Network() = default;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Zone>& zones() const { return zones_; }

  std::size_t node_index(NodeId id) const;
  std::size_t link_index(LinkId id) const;
  std::size_t segment_index(SegmentId id) const;
  bool has_node(NodeId id) const { return node_ix_.count(id) != 0; }

  /// Outgoing link indices of a node index.
  const std::vector<std::size_t>& out_links(std::size_t node_ix) const { return out_[node_ix]; }
  const std::vector<std::size_t>& in_links(std::size_t node_ix) const { return in_[node_ix]; }

  /// Link index owning segment index `s`.
  std::size_t segment_link(std::size_t s) const { return seg_link_[s]; }
  /// Position of segment index `s` inside its link (0 = first).
  std::size_t segment_position(std::size_t s) const { return seg_pos_[s]; }

  /// Zone of a node, or -1 when the node belongs to no zone.
  ZoneId zone_of(NodeId node) const;
  std::size_t zone_index(ZoneId id) const;

  double link_length_m(std::size_t link_ix) const;
  double link_free_flow_s(std::size_t link_ix) const;

  double euclidean_m(NodeId a, NodeId b) const;

 private:
  friend class NetworkBuilder;

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<Segment> segments_;
  std::vector<Zone> zones_;
  std::unordered_map<NodeId, std::size_t> node_ix_;
  std::unordered_map<LinkId, std::size_t> link_ix_;
  std::unordered_map<SegmentId, std::size_t> seg_ix_;
  std::unordered_map<ZoneId, std::size_t> zone_ix_;
  std::unordered_map<NodeId, ZoneId> node_zone_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::size_t> seg_link_;
  std::vector<std::size_t> seg_pos_;
};

/// Accumulates raw records and produces an indexed Network. `build()` does
/// not validate invariants; call validate_network() on the result.
class NetworkBuilder {
 public:
  NetworkBuilder& add_node(Node node);
  NetworkBuilder& add_link(LinkId id, NodeId from, NodeId to);
  /// Segments are appended to their link in insertion order.
  NetworkBuilder& add_segment(Segment segment);
  NetworkBuilder& add_zone(Zone zone);

  Network build() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<Segment> segments_;
  std::vector<Zone> zones_;
};

/// Total network length L_N in km (sum of all segment lengths).
double network_total_length(const Network& network);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_network(const Network& network);

/// Loads nodes.csv, links.csv, segments.csv and (optional) zones.csv from a
/// directory. Throws ParseError on malformed files.
Network load_network_csv(const std::filesystem::path& dir);
void write_network_csv(const Network& network, const std::filesystem::path& dir);

struct GridSpec {
  int rows = 10;
  int cols = 10;
  double spacing_m = 500.0;
  int segments_per_link = 2;
  int lanes = 1;
  double free_flow_kmh = 50.0;
  double jam_density = 150.0;
  double capacity_veh_h = 1800.0;
  double alpha = 1.0;
  double beta = 1.5;
  double min_speed_kmh = 5.0;
  /// Zones are square blocks of zone_block x zone_block nodes.
  int zone_block = 2;
};

/// Bidirectional rectangular grid. Node ids are row * cols + col.
Network make_grid_network(const GridSpec& spec);

}  // namespace mfdsim
