#include "edgeorch/event_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "edgeorch/errors.hpp"
#include "edgeorch/random.hpp"

namespace edgeorch {

namespace {

enum class EventType : std::uint8_t { arrival, enter_group, service_done };

struct Event {
  double time;
  std::uint64_t seq;
  EventType type;
  std::uint32_t subject;  // request class for arrivals, job id otherwise

  bool operator>(const Event& o) const {
    return time != o.time ? time > o.time : seq > o.seq;
  }
};

struct Job {
  std::uint32_t request;
  std::uint32_t stage = 0;
  std::uint32_t server = 0;
  double arrived = 0.0;
  double entered_group = 0.0;
  bool measured = false;
};

struct Group {
  int servers = 0;
  int busy = 0;
  int in_system = 0;
  std::deque<std::uint32_t> waiting;
  double last_change = 0.0;
  double busy_area = 0.0;
  double system_area = 0.0;
  std::uint64_t window_arrivals = 0;
  std::vector<double> sojourns;  // jobs entering inside the window, in entry order
};

double mean_of(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += xs[i];
  return end > begin ? sum / static_cast<double>(end - begin) : 0.0;
}

// Batch means over contiguous equal-size batches; remainder dropped.
std::pair<double, double> mean_and_ci(const std::vector<double>& xs, std::size_t batches) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = mean_of(xs, 0, xs.size());
  const std::size_t per = xs.size() / batches;
  if (per == 0) return {mean, 0.0};
  std::vector<double> means;
  means.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) means.push_back(mean_of(xs, b * per, (b + 1) * per));
  return {mean, batch_ci_half_width(means)};
}

}  // namespace

void SimConfig::validate() const {
  if (horizon == 0) throw ConfigError("simulation horizon must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  if (batches < 2) throw ConfigError("need at least two batches");
}

double batch_ci_half_width(const std::vector<double>& batch_means) {
  const std::size_t b = batch_means.size();
  if (b < 2) return 0.0;
  const double mean = mean_of(batch_means, 0, b);
  double ss = 0.0;
  for (double m : batch_means) ss += (m - mean) * (m - mean);
  const double sd = std::sqrt(ss / static_cast<double>(b - 1));
  const boost::math::students_t dist(static_cast<double>(b - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  return t * sd / std::sqrt(static_cast<double>(b));
}

EmpiricalReport simulate(const Scenario& scenario, const DeploymentPlan& plan,
                         const RoutingPolicy& routing, const SimConfig& cfg) {
  cfg.validate();
  require_routable(routing, scenario.requests);
  const std::size_t N = scenario.topology.size();
  const std::size_t S = scenario.services.size();
  const std::size_t R = scenario.requests.size();

  EmpiricalReport report;
  {
    const auto arrivals = propagate_arrivals(plan, routing, scenario.requests);
    report.unstable = !utilization(arrivals, plan, scenario.services).stable;
  }

  double total_rate = 0.0;
  for (const auto& r : scenario.requests) total_rate += std::max(0.0, r.arrival_rate);
  for (const auto& r : scenario.requests) report.requests.push_back({r.id, 0, 0.0, 0.0});
  if (!(total_rate > 0.0)) return report;

  const HopDelayTable hops(scenario.topology, scenario.services);
  std::vector<Rng> streams;
  streams.reserve(R);
  for (std::size_t r = 0; r < R; ++r) streams.emplace_back(derive_seed(cfg.seed, r));

  std::vector<Group> groups(N * S);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t s = 0; s < S; ++s) groups[n * S + s].servers = plan.count(n, s);

  const auto warmup = static_cast<std::uint64_t>(std::floor(cfg.warmup_fraction * cfg.horizon));
  double window_start = 0.0;
  double window_end = 0.0;
  bool window_open = warmup == 0;
  bool window_closed = false;

  std::vector<Job> jobs;
  jobs.reserve(cfg.horizon);
  // (arrival index, sojourn) per class for measured jobs.
  std::vector<std::vector<std::pair<std::uint64_t, double>>> done(R);

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  for (std::size_t r = 0; r < R; ++r) {
    const double rate = scenario.requests[r].arrival_rate;
    if (rate > 0.0)
      events.push({streams[r].exponential(rate), seq++, EventType::arrival, std::uint32_t(r)});
  }

  auto touch = [&](Group& g, double now) {
    if (window_open) {
      const double from = std::max(g.last_change, window_start);
      const double to = window_closed ? std::min(now, window_end) : now;
      if (to > from) {
        g.busy_area += g.busy * (to - from);
        g.system_area += g.in_system * (to - from);
      }
    }
    g.last_change = now;
  };

  auto start_service = [&](std::uint32_t job_id, double now) {
    Job& job = jobs[job_id];
    const ServiceIndex s = scenario.requests[job.request].chain[job.stage];
    const double service = streams[job.request].exponential(scenario.services[s].proc_rate);
    events.push({now + service, seq++, EventType::service_done, job_id});
  };

  std::uint64_t arrivals = 0;
  while (!events.empty()) {
    const Event ev = events.top();
    events.pop();
    ++report.events;
    const double now = ev.time;

    switch (ev.type) {
      case EventType::arrival: {
        const std::uint32_t r = ev.subject;
        if (arrivals >= cfg.horizon) break;
        const auto& req = scenario.requests[r];
        Job job{r};
        job.arrived = now;
        job.measured = arrivals >= warmup;
        if (arrivals == warmup && !window_open) {
          window_open = true;
          window_start = now;
          for (auto& g : groups) g.last_change = now;
        }
        ++arrivals;
        if (arrivals == cfg.horizon) {
          // Measurement window closes at the last external arrival; later
          // activity only drains the system.
          for (auto& g : groups) touch(g, now);
          window_end = now;
          window_closed = true;
        }
        job.server = static_cast<std::uint32_t>(streams[r].categorical(routing.request(r).entry));
        jobs.push_back(job);
        const auto id = static_cast<std::uint32_t>(jobs.size() - 1);
        events.push({now + transfer_time(req.payload_mb, scenario.access_bandwidth(r)), seq++,
                     EventType::enter_group, id});
        if (arrivals < cfg.horizon)
          events.push({now + streams[r].exponential(req.arrival_rate), seq++, EventType::arrival, r});
        break;
      }
      case EventType::enter_group: {
        Job& job = jobs[ev.subject];
        const ServiceIndex s = scenario.requests[job.request].chain[job.stage];
        Group& g = groups[job.server * S + s];
        touch(g, now);
        job.entered_group = now;
        if (window_open && !window_closed) ++g.window_arrivals;
        ++g.in_system;
        if (g.busy < g.servers) {
          ++g.busy;
          start_service(ev.subject, now);
        } else {
          g.waiting.push_back(ev.subject);
        }
        break;
      }
      case EventType::service_done: {
        Job& job = jobs[ev.subject];
        const auto& req = scenario.requests[job.request];
        const ServiceIndex s = req.chain[job.stage];
        Group& g = groups[job.server * S + s];
        touch(g, now);
        --g.in_system;
        if (window_open && job.entered_group >= window_start &&
            (!window_closed || job.entered_group <= window_end))
          g.sojourns.push_back(now - job.entered_group);
        if (!g.waiting.empty()) {
          const auto next = g.waiting.front();
          g.waiting.pop_front();
          start_service(next, now);
        } else {
          --g.busy;
        }

        if (job.stage + 1 < req.chain.size()) {
          const std::uint32_t from = job.server;
          const auto row = std::span<const double>(routing.request(job.request).hops[job.stage])
                               .subspan(std::size_t(from) * N, N);
          const auto to = static_cast<std::uint32_t>(streams[job.request].categorical(row));
          const double comm = hops(from, to, s);
          job.server = to;
          ++job.stage;
          events.push({now + comm, seq++, EventType::enter_group, ev.subject});
        } else if (job.measured) {
          const double finish = now + transfer_time(req.result_mb, scenario.access_bandwidth(job.request));
          done[job.request].push_back({ev.subject, finish - job.arrived});
        }
        break;
      }
    }
  }

  report.arrivals = arrivals;
  report.window_start = window_start;
  report.window_end = window_end;

  std::vector<std::pair<std::uint64_t, double>> all;
  for (std::size_t r = 0; r < R; ++r) {
    auto& list = done[r];
    std::sort(list.begin(), list.end());
    std::vector<double> xs;
    xs.reserve(list.size());
    for (const auto& [id, t] : list) xs.push_back(t);
    const auto [mean, ci] = mean_and_ci(xs, cfg.batches);
    report.requests[r].completed = xs.size();
    report.requests[r].mean_sojourn = mean;
    report.requests[r].ci_half_width = ci;
    all.insert(all.end(), list.begin(), list.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<double> xs;
  xs.reserve(all.size());
  for (const auto& [id, t] : all) xs.push_back(t);
  std::tie(report.overall_mean, report.overall_ci_half_width) = mean_and_ci(xs, cfg.batches);

  const double window = window_end - window_start;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t s = 0; s < S; ++s) {
      const Group& g = groups[n * S + s];
      if (g.window_arrivals == 0 && g.sojourns.empty()) continue;
      GroupStats stats;
      stats.server = n;
      stats.service = s;
      stats.instances = g.servers;
      if (window > 0.0) {
        stats.arrival_rate = g.window_arrivals / window;
        stats.utilization = g.servers > 0 ? g.busy_area / (g.servers * window) : 0.0;
        stats.mean_in_system = g.system_area / window;
      }
      const auto [mean, ci] = mean_and_ci(g.sojourns, cfg.batches);
      stats.mean_sojourn = mean;
      stats.sojourn_ci_half_width = ci;
      stats.departures = g.sojourns.size();
      report.groups.push_back(stats);
    }
  }
  return report;
}

std::string EmpiricalReport::to_csv() const {
  std::ostringstream os;
  char buf[512];
  os << "kind,id,count,mean,ci_half_width,extra1,extra2\n";
  for (const auto& r : requests) {
    std::snprintf(buf, sizeof buf, "request,%s,%llu,%.17g,%.17g,,\n", r.id.c_str(),
                  static_cast<unsigned long long>(r.completed), r.mean_sojourn, r.ci_half_width);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "overall,all,%llu,%.17g,%.17g,%d,\n",
                static_cast<unsigned long long>(arrivals), overall_mean, overall_ci_half_width,
                unstable ? 1 : 0);
  os << buf;
  for (const auto& g : groups) {
    std::snprintf(buf, sizeof buf, "group,%zu:%zu,%llu,%.17g,%.17g,%.17g,%.17g\n", g.server,
                  g.service, static_cast<unsigned long long>(g.departures), g.mean_sojourn,
                  g.sojourn_ci_half_width, g.utilization, g.mean_in_system);
    os << buf;
  }
  return os.str();
}

std::vector<Verdict> compare(const std::vector<RequestDelay>& analytic,
                             const EmpiricalReport& empirical, double rel_tol) {
  if (analytic.size() != empirical.requests.size())
    throw StructuralError("analytic and empirical request counts differ");
  std::vector<Verdict> out;
  out.reserve(analytic.size());
  for (std::size_t r = 0; r < analytic.size(); ++r) {
    const auto& emp = empirical.requests[r];
    Verdict v;
    v.request = emp.id;
    v.empirical = emp.mean_sojourn;
    v.ci_half_width = emp.ci_half_width;
    v.analytic = delay_value(analytic[r]);
    v.analytic_feasible = is_feasible(analytic[r]);
    if (!v.analytic_feasible) {
      v.pass = empirical.unstable;
    } else if (empirical.unstable) {
      v.pass = false;
    } else {
      const double tol = std::max(rel_tol * v.analytic, v.ci_half_width);
      v.pass = std::abs(v.analytic - v.empirical) <= tol;
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace edgeorch
