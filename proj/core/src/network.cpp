#include "ncsmpc/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

#include "ncsmpc/errors.hpp"
#include "ncsmpc/log.hpp"

namespace ncsmpc {

namespace {

constexpr double kSnap = 1e-9;

long long cells_ceil(double t, double h) { return static_cast<long long>(std::ceil(t / h - kSnap)); }

long long cells_exact(double t, double h, const char * what)
{
  const double c = t / h;
  const double r = std::round(c);
  if (std::abs(c - r) > kSnap * std::max(1.0, std::abs(c))) {
    std::ostringstream os;
    os << what << " (" << t << ") is not a whole number of control intervals (" << h << ")";
    throw InvalidArgument(os.str());
  }
  return static_cast<long long>(r);
}

bool same_values(const ControlSignal & a, const ControlSignal & b)
{
  if (a.size() != b.size()) { return false; }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values[i].size() != b.values[i].size() || a.values[i] != b.values[i]) { return false; }
  }
  return true;
}

}  // namespace

double UniformDelay::draw(std::mt19937_64 & rng) const
{
  if (hi <= lo) { return lo; }
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void NetworkConfig::validate(const OcpSpec & spec) const
{
  for (const UniformDelay * d : {&delay_sc, &delay_c, &delay_ca}) {
    if (!(d->lo >= 0.0) || !(d->hi >= d->lo) || !std::isfinite(d->hi)) {
      throw InvalidArgument("delay supports must satisfy 0 <= lo <= hi < inf");
    }
  }
  if (!(tau_c_max >= 0.0) || !(tau_ca_max >= 0.0) || !std::isfinite(tau_c_max + tau_ca_max)) {
    throw InvalidArgument("delay bounds must be finite and nonnegative");
  }
  if (!(dropout_probability >= 0.0 && dropout_probability <= 1.0)) {
    throw InvalidArgument("dropout probability must lie in [0, 1]");
  }
  const double h = spec.control_sampling;
  if (!(controller_sampling > 0.0) || cells_exact(controller_sampling, h, "controller sampling") < 1)
  {
    throw InvalidArgument("controller sampling must be a positive multiple of the control sampling");
  }
  if (!(transmitted_length > 0.0) ||
      cells_exact(transmitted_length, h, "transmitted length") < 1 ||
      transmitted_length > spec.prediction_horizon * (1.0 + kSnap))
  {
    throw InvalidArgument("transmitted length must be a positive grid multiple not exceeding T");
  }
}

double compute_activation_time(double t_s, double tau_sc, const NetworkConfig & cfg)
{
  return t_s + tau_sc + cfg.tau_c_max + cfg.tau_ca_max;
}

Delivery dropout_rule(double tau_c, double tau_ca, const NetworkConfig & cfg, double uniform_draw)
{
  if (tau_c + tau_ca > cfg.tau_c_max + cfg.tau_ca_max) { return Delivery::lost; }
  if (uniform_draw < cfg.dropout_probability) { return Delivery::lost; }
  return Delivery::kept;
}

bool BufferEntry::covers(double t) const
{
  const double slack = kSnap * control.sampling;
  return t >= sigma - slack && t < control.end_time() - slack;
}

void ControlBuffer::insert(BufferEntry entry)
{
  const auto pos = std::upper_bound(
    entries_.begin(), entries_.end(), entry, [](const BufferEntry & a, const BufferEntry & b) {
      return a.sigma < b.sigma || (a.sigma == b.sigma && a.id < b.id);
    });
  entries_.insert(pos, std::move(entry));
}

bool ControlBuffer::erase(std::uint64_t id)
{
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [id](const BufferEntry & e) { return e.id == id; });
  if (it == entries_.end()) { return false; }
  entries_.erase(it);
  return true;
}

bool ControlBuffer::contains(std::uint64_t id) const
{
  return std::any_of(entries_.begin(), entries_.end(),
                     [id](const BufferEntry & e) { return e.id == id; });
}

const BufferEntry * ControlBuffer::select(double t) const
{
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->sigma > t + kSnap * it->control.sampling) { continue; }
    if (it->covers(t)) { return &*it; }
  }
  return nullptr;
}

ControlSignal ControlBuffer::history(double from, double to, double sampling) const
{
  ControlSignal out{from, sampling, {}};
  const long long n = std::llround((to - from) / sampling);
  for (long long i = 0; i < n; ++i) {
    const double mid = from + (static_cast<double>(i) + 0.5) * sampling;
    const BufferEntry * e = select(mid);
    if (e == nullptr) {
      std::ostringstream os;
      os << "no buffered control covers t=" << from + static_cast<double>(i) * sampling;
      throw CoverageGap(os.str());
    }
    out.values.push_back(e->control.at(mid));
  }
  return out;
}

Vector actuator_lookup(const ActuatorBuffer & buffer, double t)
{
  const BufferEntry * e = buffer.select(t);
  if (e == nullptr) {
    std::ostringstream os;
    os << "actuator starvation: no activated control covers t=" << t;
    throw Starvation(os.str(), t);
  }
  return e->control.at(t);
}

Vector predict_state(const PlantModel & model, const ControllerBuffer & buffer, const Vector & x_ts,
                     double t_s, double sigma, double sampling, double tol)
{
  if (sigma < t_s) { throw InvalidArgument("activation time precedes the measurement time"); }
  const ControlSignal u = buffer.history(t_s, sigma, sampling);
  if (u.empty()) { return x_ts; }
  return integrate(model, x_ts, u, {t_s, sigma}, tol).back();
}

const char * to_string(EventKind kind)
{
  switch (kind) {
    case EventKind::measurement_sent: return "measurement_sent";
    case EventKind::measurement_arrival: return "measurement_arrival";
    case EventKind::measurement_skipped: return "measurement_skipped";
    case EventKind::computation_complete: return "computation_complete";
    case EventKind::control_dropped: return "control_dropped";
    case EventKind::control_arrival: return "control_arrival";
    case EventKind::activation: return "activation";
    case EventKind::rejection: return "rejection";
    case EventKind::starvation: return "starvation";
  }
  return "unknown";
}

namespace {

enum Rank : int { rank_arrival = 0, rank_activation = 1, rank_measurement = 2, rank_computation = 3 };

enum class Action { tick, measurement_arrival, computation_complete, control_arrival, activation };

struct Scheduled
{
  double time;
  int rank;
  std::uint64_t seq;
  Action action;
  std::size_t index;

  bool operator>(const Scheduled & o) const
  {
    if (time != o.time) { return time > o.time; }
    if (rank != o.rank) { return rank > o.rank; }
    return seq > o.seq;
  }
};

struct Measurement
{
  std::uint64_t id;
  long long ts_cell;
  Vector state;
  double tau_sc;
  /// Number of actuator decisions known when the measurement was taken.
  std::size_t decisions;
};

struct Decision
{
  std::uint64_t packet;
  bool accepted;
};

class Simulation
{
public:
  Simulation(const PlantModel & model, const OcpSpec & spec, const NetworkConfig & cfg,
             const Vector & x0, double duration, const NcsRunOptions & options)
  : model_(model), spec_(spec), cfg_(cfg), options_(options), h_(spec.control_sampling),
    rng_(cfg.rng_seed)
  {
    model.validate();
    spec.validate();
    cfg.validate(spec);
    if (!(duration > 0.0)) { throw InvalidArgument("duration must be positive"); }
    if (x0.size() != model.state_dim || !x0.allFinite()) {
      throw InvalidArgument("initial state must be finite with the model's dimension");
    }
    end_cell_ = cells_exact(duration, h_, "duration");
    ratio_ = cells_exact(cfg.controller_sampling, h_, "controller sampling");
    delta_cells_ = cells_exact(cfg.transmitted_length, h_, "transmitted length");

    trace_.config = cfg;
    trace_.sampling = h_;
    trace_.trajectory = Trajectory(0.0, x0, model.equilibrium_input);
    trace_.applied = ControlSignal{0.0, h_, {}};
    trace_.startup_input = model.equilibrium_input;
    x_ = x0;

    BufferEntry initial{0, 0.0,
                        ControlSignal::constant(0.0, h_, static_cast<std::size_t>(delta_cells_),
                                                model.equilibrium_input)};
    actuator_.insert(initial);
    controller_.insert(initial);
    schedule(0.0, rank_measurement, Action::tick, 0);
  }

  NcsTrace run()
  {
    const double horizon_end = t(end_cell_) + kSnap * h_;
    while (!queue_.empty() && !stopped_) {
      const Scheduled ev = queue_.top();
      if (ev.time > horizon_end) { break; }
      queue_.pop();
      switch (ev.action) {
        case Action::tick: on_tick(ev); break;
        case Action::measurement_arrival: on_measurement_arrival(ev); break;
        case Action::computation_complete: on_computation_complete(ev); break;
        case Action::control_arrival: on_control_arrival(ev); break;
        case Action::activation: on_activation(ev); break;
      }
    }
    if (!stopped_) { advance_plant(end_cell_); }
    trace_.end_time = t(plant_cell_);
    finish_records();
    return std::move(trace_);
  }

private:
  double t(long long cell) const { return static_cast<double>(cell) * h_; }

  void schedule(double time, int rank, Action action, std::size_t index)
  {
    queue_.push(Scheduled{time, rank, seq_++, action, index});
  }

  NcsEvent & log_event(const Scheduled & ev, EventKind kind, std::uint64_t packet, double t_s,
                       double sigma = std::numeric_limits<double>::quiet_NaN(),
                       std::string note = {})
  {
    trace_.events.push_back(NcsEvent{ev.time, ev.rank, ev.seq, kind, packet, t_s, sigma,
                                     std::move(note)});
    return trace_.events.back();
  }

  /// Integrates the plant to `target` under the actuator's current buffer.
  void advance_plant(long long target)
  {
    if (target <= plant_cell_ || stopped_) { return; }
    ControlSignal u{t(plant_cell_), h_, {}};
    std::optional<long long> starved;
    for (long long c = plant_cell_; c < target; ++c) {
      const BufferEntry * e = actuator_.select(t(c) + 0.5 * h_);
      if (e == nullptr) {
        starved = c;
        break;
      }
      u.values.push_back(e->control.at(t(c) + 0.5 * h_));
    }
    if (!u.empty()) {
      const long long reach = plant_cell_ + static_cast<long long>(u.size());
      const Trajectory piece =
        integrate(model_, x_, u, {t(plant_cell_), t(reach)}, spec_.integration_tolerance);
      trace_.trajectory.extend(piece);
      for (auto & v : u.values) { trace_.applied.values.push_back(std::move(v)); }
      x_ = piece.back();
      plant_cell_ = reach;
    }
    if (starved) { starve(*starved); }
  }

  void starve(long long cell)
  {
    stopped_ = true;
    const double when = t(cell);
    trace_.starvation_time = when;
    trace_.events.push_back(
      NcsEvent{when, rank_activation, seq_++, EventKind::starvation, 0, 0.0,
               std::numeric_limits<double>::quiet_NaN(), "no activated control covers this time"});
    if (options_.throw_on_starvation) {
      std::ostringstream os;
      os << "actuator starvation at t=" << when << "; recent events:";
      const std::size_t n = trace_.events.size();
      for (std::size_t i = n > 6 ? n - 6 : 0; i < n; ++i) {
        const NcsEvent & e = trace_.events[i];
        os << "\n  t=" << e.time << ' ' << to_string(e.kind) << " packet=" << e.packet;
        if (!std::isnan(e.sigma)) { os << " sigma=" << e.sigma; }
        if (!e.note.empty()) { os << " (" << e.note << ')'; }
      }
      throw Starvation(os.str(), when);
    }
  }

  void on_tick(const Scheduled & ev)
  {
    const long long k = static_cast<long long>(ev.index);
    const long long ts_cell = k * ratio_;
    advance_plant(ts_cell);
    if (stopped_) { return; }
    const double tau_sc = cfg_.delay_sc.draw(rng_);
    measurements_.push_back(
      Measurement{next_measurement_id_++, ts_cell, x_, tau_sc, decisions_.size()});
    const std::size_t idx = measurements_.size() - 1;
    log_event(ev, EventKind::measurement_sent, measurements_[idx].id, t(ts_cell));
    schedule(t(ts_cell) + tau_sc, rank_arrival, Action::measurement_arrival, idx);
    if ((k + 1) * ratio_ <= end_cell_) {
      schedule(t((k + 1) * ratio_), rank_measurement, Action::tick, static_cast<std::size_t>(k + 1));
    }
  }

  void apply_acknowledgements(const Measurement & m)
  {
    for (; decisions_seen_ < m.decisions; ++decisions_seen_) {
      const Decision & d = decisions_[decisions_seen_];
      outstanding_.erase(d.packet);
      if (!d.accepted) { controller_.erase(d.packet); }
    }
    // Packets due by t_s without a decision never reached the actuator.
    // Remaining packets (ascending sigma) are rejected by the actuator if their
    // expected input no longer matches what it will have applied; drop those too.
    for (auto it = outstanding_.begin(); it != outstanding_.end();) {
      const ControlPacketRecord & p = trace_.packets[it->second];
      bool drop = cells_exact(p.sigma, h_, "activation time") <= m.ts_cell;
      if (!drop) {
        try {
          drop = !same_values(controller_.history(p.t_s, p.sigma, h_), p.assumed_history);
        } catch (const CoverageGap &) {
          drop = true;
        }
      }
      if (drop) {
        controller_.erase(it->first);
        it = outstanding_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void on_measurement_arrival(const Scheduled & ev)
  {
    const Measurement & m = measurements_[ev.index];
    const double ts = t(m.ts_cell);
    log_event(ev, EventKind::measurement_arrival, m.id, ts);
    if (m.ts_cell <= last_ts_cell_) {
      log_event(ev, EventKind::measurement_skipped, m.id, ts, std::nan(""),
                "older than a processed measurement");
      return;
    }
    last_ts_cell_ = m.ts_cell;
    apply_acknowledgements(m);

    const long long sigma_cell = cells_ceil(compute_activation_time(ts, m.tau_sc, cfg_), h_);
    if (sigma_cell <= last_sigma_cell_) {
      log_event(ev, EventKind::measurement_skipped, m.id, ts, t(sigma_cell),
                "activation time not after the previous one");
      return;
    }
    const double sigma = t(sigma_cell);

    ControlPacketRecord p;
    try {
      p.assumed_history = controller_.history(ts, sigma, h_);
    } catch (const CoverageGap & e) {
      log_event(ev, EventKind::measurement_skipped, m.id, ts, sigma, e.what());
      return;
    }
    p.predicted_state = p.assumed_history.empty()
      ? m.state
      : integrate(model_, m.state, p.assumed_history, {ts, sigma}, spec_.integration_tolerance).back();

    std::optional<ControlSignal> warm;
    if (last_solution_) {
      warm = last_solution_->shifted(static_cast<std::size_t>(sigma_cell - last_solution_cell_),
                                     model_.equilibrium_input);
    }
    OcpSolution sol;
    try {
      sol = solve_ocp(model_, spec_, p.predicted_state, warm, sigma);
    } catch (const std::exception & e) {
      log_event(ev, EventKind::measurement_skipped, m.id, ts, sigma,
                std::string("controller failed: ") + e.what());
      return;
    }
    last_solution_ = sol.control;
    last_solution_cell_ = sigma_cell;
    last_sigma_cell_ = sigma_cell;

    p.id = next_packet_id_++;
    p.t_s = ts;
    p.sigma = sigma;
    p.tau_sc = m.tau_sc;
    p.tau_c = cfg_.delay_c.draw(rng_);
    p.tau_ca = cfg_.delay_ca.draw(rng_);
    const double draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    p.exceeded_bound = p.tau_c + p.tau_ca > cfg_.tau_c_max + cfg_.tau_ca_max;
    p.delivery = dropout_rule(p.tau_c, p.tau_ca, cfg_, draw);
    p.random_drop = p.delivery == Delivery::lost && !p.exceeded_bound;
    p.sent_at = ev.time + p.tau_c;
    if (p.delivery == Delivery::kept) { p.arrives_at = p.sent_at + p.tau_ca; }
    p.control = sol.control.slice(0, static_cast<std::size_t>(delta_cells_));
    p.control.start_time = sigma;
    p.value = sol.value;
    p.converged = sol.converged;

    controller_.insert(BufferEntry{p.id, sigma, p.control});
    outstanding_[p.id] = trace_.packets.size();
    trace_.packets.push_back(std::move(p));
    schedule(trace_.packets.back().sent_at, rank_computation, Action::computation_complete,
             trace_.packets.size() - 1);
  }

  void on_computation_complete(const Scheduled & ev)
  {
    const ControlPacketRecord & p = trace_.packets[ev.index];
    log_event(ev, EventKind::computation_complete, p.id, p.t_s, p.sigma);
    if (p.delivery == Delivery::lost) {
      log_event(ev, EventKind::control_dropped, p.id, p.t_s, p.sigma,
                p.exceeded_bound ? "delay bound exceeded" : "random drop");
      return;
    }
    schedule(p.arrives_at, rank_arrival, Action::control_arrival, ev.index);
  }

  void on_control_arrival(const Scheduled & ev)
  {
    const ControlPacketRecord & p = trace_.packets[ev.index];
    log_event(ev, EventKind::control_arrival, p.id, p.t_s, p.sigma);
    schedule(p.sigma, rank_activation, Action::activation, ev.index);
  }

  void on_activation(const Scheduled & ev)
  {
    const ControlPacketRecord & p = trace_.packets[ev.index];
    const long long sigma_cell = cells_exact(p.sigma, h_, "activation time");
    advance_plant(sigma_cell);
    if (stopped_) { return; }

    bool consistent = false;
    try {
      consistent = same_values(actuator_.history(p.t_s, p.sigma, h_), p.assumed_history);
    } catch (const CoverageGap &) {
      consistent = false;
    }
    decisions_.push_back(Decision{p.id, consistent});
    if (!consistent) {
      log_event(ev, EventKind::rejection, p.id, p.t_s, p.sigma,
                "expected input differs from the applied input");
      return;
    }
    actuator_.insert(BufferEntry{p.id, p.sigma, p.control});
    log_event(ev, EventKind::activation, p.id, p.t_s, p.sigma);
    trace_.activations.push_back(
      ActivationRecord{p.id, p.sigma, p.t_s, p.predicted_state, x_, p.value, p.converged});
  }

  void finish_records()
  {
    const auto & acts = trace_.activations;
    for (std::size_t i = 1; i < acts.size(); ++i) {
      trace_.realized_horizons.push_back(acts[i].sigma - acts[i - 1].sigma);
    }
    RunRecords & rec = trace_.records;
    rec.trajectory = trace_.trajectory;
    if (acts.empty()) {
      rec.final_time = trace_.end_time;
      rec.final_state = x_;
      return;
    }
    for (std::size_t i = 0; i + 1 < acts.size(); ++i) {
      const long long a = cells_exact(acts[i].sigma, h_, "activation time");
      const long long b = cells_exact(acts[i + 1].sigma, h_, "activation time");
      StepRecord s;
      s.index = i;
      s.time = acts[i].sigma;
      s.state = acts[i].actual_state;
      s.value = acts[i].value;
      s.converged = acts[i].converged;
      s.delta = t(b) - t(a);
      s.applied = trace_.applied.slice(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a));
      s.applied.start_time = t(a);
      s.stage_integral = stage_integral_along(model_, spec_.stage_cost, s.state, s.applied,
                                              {t(a), t(b)}, spec_.integration_tolerance);
      rec.steps.push_back(std::move(s));
    }
    rec.final_time = acts.back().sigma;
    rec.final_state = acts.back().actual_state;
    rec.final_value = acts.back().value;
    rec.final_converged = acts.back().converged;
  }

  const PlantModel & model_;
  const OcpSpec & spec_;
  const NetworkConfig & cfg_;
  NcsRunOptions options_;
  double h_;
  std::mt19937_64 rng_;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
  std::uint64_t seq_{0};

  long long end_cell_{0};
  long long ratio_{1};
  long long delta_cells_{1};
  bool stopped_{false};
  NcsTrace trace_;

  // plant
  long long plant_cell_{0};
  Vector x_;

  // actuator
  ActuatorBuffer actuator_;
  std::vector<Decision> decisions_;

  // sensor
  std::vector<Measurement> measurements_;
  std::uint64_t next_measurement_id_{1};

  // controller
  ControllerBuffer controller_;
  /// Sent packets without a known actuator decision: id -> index into trace_.packets.
  std::map<std::uint64_t, std::size_t> outstanding_;
  std::size_t decisions_seen_{0};
  long long last_ts_cell_{-1};
  long long last_sigma_cell_{-1};
  std::optional<ControlSignal> last_solution_;
  long long last_solution_cell_{0};
  std::uint64_t next_packet_id_{1};
};

}  // namespace

NcsTrace run_ncs_simulation(const PlantModel & model, const OcpSpec & spec,
                            const NetworkConfig & cfg, const Vector & x0, double duration,
                            const NcsRunOptions & options)
{
  return Simulation(model, spec, cfg, x0, duration, options).run();
}

ConsistencyReport prediction_consistency_check(const NcsTrace & trace)
{
  ConsistencyReport report;
  const double h = trace.sampling;
  const auto fail = [&report](double when, std::string message) {
    if (!report.violation_time || when < *report.violation_time) {
      report.passed = false;
      report.violation_time = when;
      report.message = std::move(message);
    }
  };

  // Rebuild the actuator from the log: the start-up segment plus every activated packet.
  ActuatorBuffer replay;
  const std::size_t startup_cells =
    static_cast<std::size_t>(std::llround(trace.config.transmitted_length / h));
  replay.insert(
    BufferEntry{0, 0.0, ControlSignal::constant(0.0, h, startup_cells, trace.startup_input)});
  std::map<std::uint64_t, const ControlPacketRecord *> by_id;
  for (const auto & p : trace.packets) { by_id[p.id] = &p; }
  for (const auto & e : trace.events) {
    if (e.kind != EventKind::activation) { continue; }
    const auto it = by_id.find(e.packet);
    if (it == by_id.end()) {
      fail(e.time, "activation of an unknown packet");
      continue;
    }
    replay.insert(BufferEntry{e.packet, it->second->sigma, it->second->control});
  }

  // (ii) coverage, and agreement of the replay with the recorded input.
  for (std::size_t c = 0; c < trace.applied.size(); ++c) {
    const double mid = (static_cast<double>(c) + 0.5) * h;
    const BufferEntry * e = replay.select(mid);
    if (e == nullptr) {
      fail(static_cast<double>(c) * h, "no activated control covers this time");
      break;
    }
    if (e->control.at(mid) != trace.applied.values[c]) {
      fail(static_cast<double>(c) * h, "recorded input differs from the replayed actuator");
      break;
    }
  }
  if (trace.starvation_time) { fail(*trace.starvation_time, "actuator starvation"); }

  // (i) expected history equals the applied input for every activation.
  for (const auto & a : trace.activations) {
    ++report.activations_checked;
    const ControlPacketRecord & p = *by_id.at(a.packet);
    ControlSignal applied;
    try {
      applied = replay.history(p.t_s, p.sigma, h);
    } catch (const CoverageGap &) {
      fail(p.t_s, "applied input undefined before an activation");
      continue;
    }
    if (!same_values(applied, p.assumed_history)) {
      fail(p.sigma, "controller-assumed input differs from the applied input");
    }
    report.max_prediction_error = std::max(
      report.max_prediction_error, (a.predicted_state - a.actual_state).lpNorm<Eigen::Infinity>());
  }
  if (report.passed) { report.message = "consistent"; }
  return report;
}

}  // namespace ncsmpc
