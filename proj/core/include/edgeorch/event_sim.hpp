#pragma once

// Discrete-event simulation of a deployed plan, used as an empirical oracle
// for the analytical delay model. Jobs arrive as Poisson streams per request
// class, walk their chain sampling each next server from the routing policy,
// queue FCFS at (server, service) groups of N_n^s exponential servers, and
// pay deterministic transmit / communication / return delays in between.

#include <cstdint>
#include <string>
#include <vector>

#include "edgeorch/delay.hpp"
#include "edgeorch/model.hpp"

namespace edgeorch {

struct SimConfig {
  std::uint64_t horizon = 200000;  // total external arrivals
  double warmup_fraction = 0.2;
  std::uint64_t seed = 1;
  std::size_t batches = 10;

  void validate() const;
};

struct RequestStats {
  std::string id;
  std::uint64_t completed = 0;  // post-warmup jobs measured
  double mean_sojourn = 0.0;
  double ci_half_width = 0.0;   // 95% batch-means
};

struct GroupStats {
  ServerIndex server = 0;
  ServiceIndex service = 0;
  int instances = 0;
  double arrival_rate = 0.0;    // observed in the measurement window
  double utilization = 0.0;     // busy-server time / (c * window)
  double mean_in_system = 0.0;  // time-average number of jobs
  double mean_sojourn = 0.0;
  double sojourn_ci_half_width = 0.0;
  std::uint64_t departures = 0;
};

struct EmpiricalReport {
  std::vector<RequestStats> requests;
  double overall_mean = 0.0;
  double overall_ci_half_width = 0.0;
  std::vector<GroupStats> groups;  // groups that saw traffic
  bool unstable = false;           // some group has rho >= 1
  std::uint64_t arrivals = 0;
  std::uint64_t events = 0;
  double window_start = 0.0;
  double window_end = 0.0;

  bool empty() const { return arrivals == 0; }
  // Fixed-precision text form; identical inputs give identical bytes.
  std::string to_csv() const;
};

// Throws UnreachableStageError if the routing cannot carry every request.
EmpiricalReport simulate(const Scenario& scenario, const DeploymentPlan& plan,
                         const RoutingPolicy& routing, const SimConfig& cfg);

struct Verdict {
  std::string request;
  double analytic = 0.0;
  double empirical = 0.0;
  double ci_half_width = 0.0;
  bool analytic_feasible = true;
  bool pass = false;
};

// pass iff |analytic - empirical| <= max(rel_tol * analytic, CI half-width).
// An infeasible analytic value agrees only with an unstable simulation.
std::vector<Verdict> compare(const std::vector<RequestDelay>& analytic,
                             const EmpiricalReport& empirical, double rel_tol);

// Two-sided 95% Student-t half-width for the mean of `samples`.
double batch_ci_half_width(const std::vector<double>& batch_means);

}  // namespace edgeorch
