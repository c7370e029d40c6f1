#pragma once

// Seeded closed-loop simulator, with or without a replay attack.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "wmcusum/attack.hpp"
#include "wmcusum/plant.hpp"

namespace wmcusum {

enum class NoiseStream : std::uint32_t { Process = 1, Measurement = 2, Watermark = 3 };

/// Gaussian draws for w, v and e from three independent engines derived from
/// one seed. Changing Sigma_e rescales the same standard-normal sequence, so
/// runs that differ only in the watermark covariance are paired.
class NoiseStreams {
 public:
  NoiseStreams(const SystemModel& sys, const Matrix& sigma_e, std::uint64_t seed,
               double zero_threshold = 1e-9)
      : fw_(psd_sqrt(sys.Q, zero_threshold)),
        fv_(psd_sqrt(sys.R, zero_threshold)),
        fe_(psd_sqrt(sigma_e, zero_threshold)),
        gw_(engine(seed, NoiseStream::Process)),
        gv_(engine(seed, NoiseStream::Measurement)),
        ge_(engine(seed, NoiseStream::Watermark)) {
    require_shape(sigma_e, sys.p(), sys.p(), "Sigma_e");
  }

  NoiseDraw draw() {
    return NoiseDraw{fw_ * standard(gw_, nw_, fw_.cols()), fv_ * standard(gv_, nv_, fv_.cols()),
                     fe_ * standard(ge_, ne_, fe_.cols())};
  }

  static std::mt19937_64 engine(std::uint64_t seed, NoiseStream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
  }

 private:
  static Vector standard(std::mt19937_64& g, std::normal_distribution<double>& normal,
                         Eigen::Index size) {
    Vector z(size);
    for (Eigen::Index i = 0; i < size; ++i) z(i) = normal(g);
    return z;
  }

  Matrix fw_, fv_, fe_;
  std::mt19937_64 gw_, gv_, ge_;
  // One distribution per engine: libstdc++ caches the second Box-Muller draw.
  std::normal_distribution<double> nw_, nv_, ne_;
};

/// Derive the seed of trial `index` from a campaign seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline constexpr std::int64_t kDefaultBurnIn = 1000;

/// Steps the loop one record at a time. The first recorded step is k = 1,
/// preceded by `burn_in` unrecorded steps from x = x̂ = 0 that bring the
/// loop to its stationary regime.
class Simulator {
 public:
  Simulator(SystemModel sys, ClosedLoopDesign d, const Matrix& sigma_e, std::uint64_t seed,
            std::optional<ReplayAttack> attack = std::nullopt,
            std::int64_t burn_in = kDefaultBurnIn, double zero_threshold = 1e-9)
      : sys_(std::move(sys)),
        d_(std::move(d)),
        noise_(sys_, sigma_e, seed, zero_threshold),
        attack_(attack),
        tape_(attack ? attack->k0 : 1) {
    require(burn_in >= 0, ErrorCode::InvalidArgument, "burn_in must be >= 0");
    if (attack_) attack_->validate();
    state_ = zero_state(sys_);
    state_.k = -burn_in + 1;
    while (state_.k < 1) step();
  }

  StepRecord step() {
    const NoiseDraw noise = noise_.draw();
    std::pair<LoopState, StepRecord> out;
    if (attack_ && state_.k >= attack_->nu) {
      out = step_replay(state_, tape_, d_, sys_, noise);
    } else {
      out = step_normal(state_, d_, sys_, noise);
      tape_.record(out.second.y);
    }
    state_ = std::move(out.first);
    return std::move(out.second);
  }

  const LoopState& state() const { return state_; }
  const SystemModel& system() const { return sys_; }
  const ClosedLoopDesign& loop_design() const { return d_; }
  const std::optional<ReplayAttack>& attack() const { return attack_; }

 private:
  SystemModel sys_;
  ClosedLoopDesign d_;
  NoiseStreams noise_;
  std::optional<ReplayAttack> attack_;
  ReplayTape tape_;
  LoopState state_;
};

/// Records for k = 1..horizon. Deterministic in `seed`.
inline std::vector<StepRecord> simulate(const SystemModel& sys, const ClosedLoopDesign& d,
                                        const Matrix& sigma_e, std::int64_t horizon,
                                        std::uint64_t seed,
                                        std::optional<ReplayAttack> attack = std::nullopt,
                                        std::int64_t burn_in = kDefaultBurnIn) {
  require(horizon >= 1, ErrorCode::InvalidArgument, "horizon must be >= 1");
  Simulator sim(sys, d, sigma_e, seed, attack, burn_in);
  std::vector<StepRecord> records;
  records.reserve(static_cast<std::size_t>(horizon));
  for (std::int64_t i = 0; i < horizon; ++i) records.push_back(sim.step());
  return records;
}

}  // namespace wmcusum
