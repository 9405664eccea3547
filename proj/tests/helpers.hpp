#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mfdsim/network.hpp"

namespace testutil {

/// Chain of nodes 0..n along x, one link per hop, `segs` segments per link.
/// Both directions when `two_way`.
inline mfdsim::Network line_network(int hops, double seg_len_m, int segs = 1, bool two_way = false,
                                    double vf_kmh = 60.0, double cap = 1800.0) {
  mfdsim::NetworkBuilder b;
  for (int i = 0; i <= hops; ++i) b.add_node({i, i * seg_len_m * segs, 0.0});
  mfdsim::SegmentId sid = 1;
  mfdsim::LinkId lid = 1;
  auto add = [&](mfdsim::NodeId from, mfdsim::NodeId to) {
    b.add_link(lid, from, to);
    for (int k = 0; k < segs; ++k) {
      mfdsim::Segment s;
      s.id = sid++;
      s.link_id = lid;
      s.length_m = seg_len_m;
      s.free_flow_kmh = vf_kmh;
      s.capacity_veh_h = cap;
      b.add_segment(s);
    }
    ++lid;
  };
  for (int i = 0; i < hops; ++i) add(i, i + 1);
  if (two_way)
    for (int i = 0; i < hops; ++i) add(i + 1, i);
  return b.build();
}

inline bool rel_close(double a, double b, double rel = 1e-9) {
  return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mfdsim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
