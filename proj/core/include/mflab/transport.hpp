#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mflab/measure.hpp"

namespace mflab {

// Largest total atom count accepted by the exact transport solvers.
inline constexpr std::size_t kMaxTransportAtoms = 64;

// Optimal value of the transportation problem
//   min sum_ij c_ij p_ij  s.t.  sum_j p_ij = supply_i, sum_i p_ij = demand_j, p >= 0
// solved by successive shortest augmenting paths (Dijkstra with potentials). cost is row-major
// supply.size() x demand.size(); supply and demand must have equal mass.
double optimal_transport_cost(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost);

// Kantorovich-Rubinstein distance via the transport linear program with
// ground cost |x - y|. Independent of the CDF formula used by dkr().
double dkr_lp_oracle(const DiscreteMeasure& m0, const DiscreteMeasure& m1);

// Atom of a measure on R^d.
struct PointAtom {
  std::vector<double> position;
  double weight;
};

// Product measure m_1 (x) ... (x) m_d as a list of atoms on R^d.
std::vector<PointAtom> product_measure(std::span<const DiscreteMeasure> factors);

// Transport distance on R^d with L1 ground cost.
double transport_distance_l1(std::span<const PointAtom> a, std::span<const PointAtom> b);

}  // namespace mflab
