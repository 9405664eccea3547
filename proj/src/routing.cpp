#include "mfdsim/routing.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

#include "mfdsim/errors.hpp"

namespace mfdsim {

TravelTimeTable::TravelTimeTable(std::size_t segments, std::size_t periods, double period_s, double fill)
    : segments_(segments), periods_(periods), period_s_(period_s), values_(segments * periods, fill) {
  if (periods == 0) throw DomainError("travel time table needs at least one period");
  if (!(period_s > 0.0)) throw DomainError("period length must be > 0");
}

TravelTimeTable TravelTimeTable::free_flow(const Network& network, double period_s, std::size_t periods) {
  TravelTimeTable t(network.segments().size(), periods, period_s);
  for (std::size_t s = 0; s < network.segments().size(); ++s) {
    const double ff = network.segments()[s].free_flow_time_s();
    for (std::size_t p = 0; p < periods; ++p) t.at(s, p) = ff;
  }
  return t;
}

std::size_t TravelTimeTable::period_of(double t_s) const {
  if (t_s <= 0.0) return 0;
  const auto p = static_cast<std::size_t>(t_s / period_s_);
  return std::min(p, periods_ - 1);
}

double TravelTimeTable::link_time(const Network& network, std::size_t link_ix, double t_s) const {
  double t = t_s;
  for (auto s : network.links()[link_ix].segments) t += time(s, t);
  return t - t_s;
}

namespace {

using Label = std::tuple<double, std::size_t>;  // (cost, node index)

Path rebuild(const Network& network, std::size_t from_ix, std::size_t to_ix,
             const std::vector<std::size_t>& pred_link) {
  Path p;
  std::size_t cur = to_ix;
  while (cur != from_ix) {
    const auto l = pred_link[cur];
    p.links.push_back(l);
    cur = network.node_index(network.links()[l].from);
  }
  std::reverse(p.links.begin(), p.links.end());
  for (auto l : p.links) {
    for (auto s : network.links()[l].segments) {
      p.segments.push_back(s);
      p.length_m += network.segments()[s].length_m;
    }
  }
  p.found = true;
  return p;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

Path shortest_path(const Network& network, const TravelTimeTable& table, NodeId from, NodeId to,
                   double depart_s) {
  const auto src = network.node_index(from);
  const auto dst = network.node_index(to);
  const std::size_t n = network.nodes().size();
  std::vector<double> arrival(n, kUnreachable);
  std::vector<std::size_t> pred(n, kNone);
  std::vector<bool> done(n, false);
  std::priority_queue<Label, std::vector<Label>, std::greater<>> heap;
  arrival[src] = depart_s;
  heap.emplace(depart_s, src);
  while (!heap.empty()) {
    auto [t, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u == dst) break;
    for (auto l : network.out_links(u)) {
      const auto v = network.node_index(network.links()[l].to);
      if (done[v]) continue;
      const double tv = t + table.link_time(network, l, t);
      if (tv < arrival[v] || (tv == arrival[v] && pred[v] != kNone && l < pred[v])) {
        arrival[v] = tv;
        pred[v] = l;
        heap.emplace(tv, v);
      }
    }
  }
  if (src == dst) {
    Path p;
    p.found = true;
    return p;
  }
  if (pred[dst] == kNone) return Path{};
  Path p = rebuild(network, src, dst, pred);
  p.time_s = arrival[dst] - depart_s;
  return p;
}

Path shortest_distance_path(const Network& network, NodeId from, NodeId to) {
  const auto src = network.node_index(from);
  const auto dst = network.node_index(to);
  if (src == dst) {
    Path p;
    p.found = true;
    return p;
  }
  const auto cost = link_lengths(network);
  const std::size_t n = network.nodes().size();
  std::vector<double> dist(n, kUnreachable);
  std::vector<std::size_t> pred(n, kNone);
  std::vector<bool> done(n, false);
  std::priority_queue<Label, std::vector<Label>, std::greater<>> heap;
  dist[src] = 0.0;
  heap.emplace(0.0, src);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u == dst) break;
    for (auto l : network.out_links(u)) {
      const auto v = network.node_index(network.links()[l].to);
      const double dv = d + cost[l];
      if (dv < dist[v] || (dv == dist[v] && pred[v] != kNone && l < pred[v])) {
        dist[v] = dv;
        pred[v] = l;
        heap.emplace(dv, v);
      }
    }
  }
  if (pred[dst] == kNone) return Path{};
  Path p = rebuild(network, src, dst, pred);
  for (auto s : p.segments) p.time_s += network.segments()[s].free_flow_time_s();
  return p;
}

std::vector<double> dijkstra_costs(const Network& network, const std::vector<double>& link_cost,
                                   std::size_t source_node_ix, bool reverse) {
  const std::size_t n = network.nodes().size();
  std::vector<double> dist(n, kUnreachable);
  std::vector<bool> done(n, false);
  std::priority_queue<Label, std::vector<Label>, std::greater<>> heap;
  dist[source_node_ix] = 0.0;
  heap.emplace(0.0, source_node_ix);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    const auto& adj = reverse ? network.in_links(u) : network.out_links(u);
    for (auto l : adj) {
      const auto& link = network.links()[l];
      const auto v = network.node_index(reverse ? link.from : link.to);
      const double dv = d + link_cost[l];
      if (dv < dist[v]) {
        dist[v] = dv;
        heap.emplace(dv, v);
      }
    }
  }
  return dist;
}

std::vector<double> link_costs_at(const Network& network, const TravelTimeTable& table, std::size_t period) {
  std::vector<double> cost(network.links().size(), 0.0);
  for (std::size_t l = 0; l < network.links().size(); ++l)
    for (auto s : network.links()[l].segments) cost[l] += table.at(s, period);
  return cost;
}

std::vector<double> link_lengths(const Network& network) {
  std::vector<double> cost(network.links().size(), 0.0);
  for (std::size_t l = 0; l < network.links().size(); ++l) cost[l] = network.link_length_m(l);
  return cost;
}

Path path_from_links(const Network& network, const std::vector<std::size_t>& links) {
  Path p;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (i > 0 && network.links()[links[i - 1]].to != network.links()[links[i]].from)
      throw DomainError("links are not contiguous");
    for (auto s : network.links()[links[i]].segments) {
      p.segments.push_back(s);
      p.length_m += network.segments()[s].length_m;
      p.time_s += network.segments()[s].free_flow_time_s();
    }
  }
  p.links = links;
  p.found = true;
  return p;
}

}  // namespace mfdsim
