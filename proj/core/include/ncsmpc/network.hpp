#pragma once

/**
 * @file
 * @brief Discrete-event simulation of a sensor, controller and actuator that
 * exchange time-stamped packets over delayed, lossy links.
 *
 * The controller answers each measurement x(t_s) with a control segment that
 * the actuator may use from the activation time sigma on. Before solving, the
 * controller predicts x(sigma) with the input it expects the actuator to apply
 * on [t_s, sigma). Every control packet carries that expected input; the
 * actuator activates a packet only if the expectation matches what it really
 * applied, and reports its decisions back on later measurement packets.
 */

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncsmpc/common.hpp"
#include "ncsmpc/control_signal.hpp"
#include "ncsmpc/dynamics.hpp"
#include "ncsmpc/mpc.hpp"

namespace ncsmpc {

/// Delay drawn uniformly from [lo, hi]; lo == hi gives a constant delay.
struct UniformDelay
{
  double lo{0.0};
  double hi{0.0};

  double draw(std::mt19937_64 & rng) const;
};

struct NetworkConfig
{
  UniformDelay delay_sc;  ///< sensor to controller
  UniformDelay delay_c;   ///< computation
  UniformDelay delay_ca;  ///< controller to actuator
  double tau_c_max{0.0};
  double tau_ca_max{0.0};
  double dropout_probability{0.0};
  /// Period of the sensor; a whole multiple of the control sampling.
  double controller_sampling{0.1};
  /// Length Delta of the transmitted control segment.
  double transmitted_length{0.3};
  std::uint64_t rng_seed{0};

  /// Checks delay supports, probabilities and grid alignment against `spec`.
  void validate(const OcpSpec & spec) const;
};

/// sigma = t_s + tau_sc + tau_c_max + tau_ca_max.
double compute_activation_time(double t_s, double tau_sc, const NetworkConfig & cfg);

enum class Delivery { kept, lost };

/**
 * @brief Lost iff tau_c + tau_ca exceeds tau_c_max + tau_ca_max, or the uniform
 * draw in [0, 1) falls below the dropout probability.
 */
Delivery dropout_rule(double tau_c, double tau_ca, const NetworkConfig & cfg,
                      double uniform_draw = 1.0);

/// Control segment usable on [sigma, sigma + Delta).
struct BufferEntry
{
  std::uint64_t id{0};
  double sigma{0.0};
  ControlSignal control;

  bool covers(double t) const;
};

/**
 * @brief Control segments ordered by activation time.
 *
 * Used on the actuator side (activated segments) and on the controller side
 * (segments the controller expects the actuator to apply).
 */
class ControlBuffer
{
public:
  void insert(BufferEntry entry);
  bool erase(std::uint64_t id);
  bool contains(std::uint64_t id) const;

  /// Entry with the largest sigma <= t whose support covers t (ties: larger id); null if none.
  const BufferEntry * select(double t) const;

  /// Input on the grid cells of [from, to) with the given sampling; throws
  /// CoverageGap if some cell is not covered.
  ControlSignal history(double from, double to, double sampling) const;

  const std::vector<BufferEntry> & entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

private:
  std::vector<BufferEntry> entries_;
};

using ActuatorBuffer = ControlBuffer;
using ControllerBuffer = ControlBuffer;

/// Input applied at time t; throws Starvation if no entry covers t.
Vector actuator_lookup(const ActuatorBuffer & buffer, double t);

/**
 * @brief x(sigma) from x(t_s) under the buffered input on [t_s, sigma).
 *
 * Throws CoverageGap if the buffer does not describe that input.
 */
Vector predict_state(const PlantModel & model, const ControllerBuffer & buffer, const Vector & x_ts,
                     double t_s, double sigma, double sampling, double tol);

enum class EventKind {
  measurement_sent,
  measurement_arrival,
  measurement_skipped,
  computation_complete,
  control_dropped,
  control_arrival,
  activation,
  rejection,
  starvation,
};

const char * to_string(EventKind kind);

struct NcsEvent
{
  double time{0.0};
  int rank{0};
  std::uint64_t seq{0};
  EventKind kind{EventKind::measurement_sent};
  /// Packet id (measurement or control), or 0.
  std::uint64_t packet{0};
  double t_s{0.0};
  double sigma{std::numeric_limits<double>::quiet_NaN()};
  std::string note;
};

/// One control packet and its fate.
struct ControlPacketRecord
{
  std::uint64_t id{0};
  double t_s{0.0};
  double sigma{0.0};
  double tau_sc{0.0};
  double tau_c{0.0};
  double tau_ca{0.0};
  double sent_at{0.0};
  /// +inf when lost.
  double arrives_at{std::numeric_limits<double>::infinity()};
  Delivery delivery{Delivery::kept};
  bool exceeded_bound{false};
  bool random_drop{false};
  /// The input the controller expected on [t_s, sigma).
  ControlSignal assumed_history;
  /// Transmitted segment on [sigma, sigma + Delta).
  ControlSignal control;
  Vector predicted_state;
  double value{0.0};
  bool converged{false};
};

/// A control packet that the actuator activated.
struct ActivationRecord
{
  std::uint64_t packet{0};
  double sigma{0.0};
  double t_s{0.0};
  Vector predicted_state;
  Vector actual_state;
  double value{0.0};
  bool converged{false};
};

struct NcsRunOptions
{
  /// When false, starvation ends the run and is recorded in the trace instead.
  bool throw_on_starvation{true};
};

struct NcsTrace
{
  NetworkConfig config;
  double sampling{0.01};
  double end_time{0.0};
  std::vector<NcsEvent> events;
  std::vector<ControlPacketRecord> packets;
  std::vector<ActivationRecord> activations;
  /// sigma_{i+1} - sigma_i over consecutive activations.
  std::vector<double> realized_horizons;
  Trajectory trajectory;
  /// Input applied by the actuator on [0, end_time).
  ControlSignal applied;
  /// Input held from t = 0 for one transmitted length before the first activation.
  Vector startup_input;
  /// Per-activation records; V_T is the controller's value at its predicted state.
  RunRecords records;
  std::optional<double> starvation_time;
};

/**
 * @brief Seeded event-driven simulation of the networked MPC loop over [0, duration].
 *
 * Until the first activation the actuator applies the equilibrium input for
 * one transmitted length. Events at equal times are processed in the order
 * packet arrival, activation, measurement, computation complete.
 */
NcsTrace run_ncs_simulation(const PlantModel & model, const OcpSpec & spec,
                            const NetworkConfig & cfg, const Vector & x0, double duration,
                            const NcsRunOptions & options = {});

struct ConsistencyReport
{
  bool passed{true};
  std::size_t activations_checked{0};
  /// Largest |predicted - actual| of x(sigma) over activations.
  double max_prediction_error{0.0};
  std::optional<double> violation_time;
  std::string message;
};

/**
 * @brief Replays a trace: every activated packet's expected input on
 * [t_s, sigma) must equal the applied input exactly, and some activated
 * segment must cover every instant of the run.
 */
ConsistencyReport prediction_consistency_check(const NcsTrace & trace);

}  // namespace ncsmpc
