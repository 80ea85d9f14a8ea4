#include "mflab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mflab/errors.hpp"

namespace mflab {
namespace {

constexpr double kMassEps = 1e-15;

}  // namespace

double optimal_transport_cost(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost) {
  const std::size_t n = supply.size(), m = demand.size();
  if (n + m > kMaxTransportAtoms)
    throw SizeLimitExceeded("transport solver is limited to " + std::to_string(kMaxTransportAtoms) + " atoms");
  if (cost.size() != n * m) throw InvalidArgument("cost matrix has the wrong size");
  if (n == 0 || m == 0) throw InvalidArgument("transport problem needs nonempty marginals");

  // Min-cost flow on super source s -> sources -> sinks -> super sink t,
  // augmenting along Dijkstra shortest paths with Johnson potentials. Dense
  // residual matrices; the graph has at most kMaxTransportAtoms + 2 nodes.
  const std::size_t s = n + m, t = n + m + 1, nodes = n + m + 2;
  double mass = 0.0;
  for (double v : supply) mass += v;
  const double eps = kMassEps * std::max(1.0, mass);
  std::vector<double> cap(nodes * nodes, 0.0), arc(nodes * nodes, 0.0);
  auto at = [nodes](std::size_t u, std::size_t v) { return u * nodes + v; };
  for (std::size_t i = 0; i < n; ++i) {
    cap[at(s, i)] = supply[i];
    for (std::size_t j = 0; j < m; ++j) {
      cap[at(i, n + j)] = 2.0 * mass + 1.0;
      arc[at(i, n + j)] = cost[i * m + j];
      arc[at(n + j, i)] = -cost[i * m + j];
    }
  }
  for (std::size_t j = 0; j < m; ++j) cap[at(n + j, t)] = demand[j];

  // Feasible initial potentials for possibly negative costs.
  std::vector<double> pi(nodes, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i) pi[n + j] = std::min(pi[n + j], cost[i * m + j]);
  for (std::size_t j = 0; j < m; ++j) pi[t] = std::min(pi[t], pi[n + j]);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nodes);
  std::vector<std::size_t> pred(nodes);
  std::vector<char> done(nodes);
  double sent = 0.0;
  const std::size_t max_augmentations = 100 * nodes * nodes;
  for (std::size_t iter = 0; sent < mass - eps; ++iter) {
    if (iter == max_augmentations) throw Error("transport solver did not converge");
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    dist[s] = 0.0;
    for (;;) {
      std::size_t u = nodes;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < inf && (u == nodes || dist[v] < dist[u])) u = v;
      if (u == nodes) break;
      done[u] = 1;
      for (std::size_t v = 0; v < nodes; ++v) {
        if (done[v] || cap[at(u, v)] <= eps) continue;
        // Rounding can make reduced costs slightly negative; clamp.
        const double d = dist[u] + std::max(0.0, arc[at(u, v)] + pi[u] - pi[v]);
        if (d < dist[v]) {
          dist[v] = d;
          pred[v] = u;
        }
      }
    }
    if (dist[t] == inf) break;
    for (std::size_t v = 0; v < nodes; ++v)
      if (dist[v] < inf) pi[v] += dist[v];
    double amount = inf;
    for (std::size_t v = t; v != s; v = pred[v]) amount = std::min(amount, cap[at(pred[v], v)]);
    for (std::size_t v = t; v != s; v = pred[v]) {
      cap[at(pred[v], v)] -= amount;
      cap[at(v, pred[v])] += amount;
    }
    sent += amount;
  }

  std::vector<double> flow(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) flow[i * m + j] = cap[at(n + j, i)];
  double total = 0.0;
  for (std::size_t k = 0; k < n * m; ++k) total += flow[k] * cost[k];
  return total;
}

double dkr_lp_oracle(const DiscreteMeasure& m0, const DiscreteMeasure& m1) {
  auto a = m0.atoms();
  auto b = m1.atoms();
  if (a.size() + b.size() > kMaxTransportAtoms)
    throw SizeLimitExceeded("dkr_lp_oracle is limited to " + std::to_string(kMaxTransportAtoms) + " atoms");
  std::vector<double> supply, demand, cost;
  for (const Atom& x : a) supply.push_back(x.weight);
  for (const Atom& y : b) demand.push_back(y.weight);
  for (const Atom& x : a)
    for (const Atom& y : b) cost.push_back(std::abs(x.position - y.position));
  return optimal_transport_cost(supply, demand, cost);
}

std::vector<PointAtom> product_measure(std::span<const DiscreteMeasure> factors) {
  std::vector<PointAtom> out{{{}, 1.0}};
  for (const DiscreteMeasure& f : factors) {
    std::vector<PointAtom> next;
    next.reserve(out.size() * f.size());
    for (const PointAtom& p : out)
      for (const Atom& a : f.atoms()) {
        PointAtom q = p;
        q.position.push_back(a.position);
        q.weight *= a.weight;
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

double transport_distance_l1(std::span<const PointAtom> a, std::span<const PointAtom> b) {
  std::vector<double> supply, demand, cost;
  for (const PointAtom& x : a) supply.push_back(x.weight);
  for (const PointAtom& y : b) demand.push_back(y.weight);
  for (const PointAtom& x : a)
    for (const PointAtom& y : b) {
      if (x.position.size() != y.position.size()) throw InvalidArgument("dimension mismatch");
      double c = 0.0;
      for (std::size_t d = 0; d < x.position.size(); ++d) c += std::abs(x.position[d] - y.position[d]);
      cost.push_back(c);
    }
  return optimal_transport_cost(supply, demand, cost);
}

}  // namespace mflab
