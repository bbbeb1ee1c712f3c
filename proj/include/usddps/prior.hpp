#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "usddps/audio.hpp"
#include "usddps/usdp_protocol.hpp"

namespace usddps {

struct ScoreEstimate {
  Waveform score;     // grad log p(x) at noise level sigma
  Waveform denoised;  // Tweedie estimate x + sigma^2 * score
};

// Clean-speech prior queried by the sampler. Implementations are used
// sequentially from one thread.
class ScorePrior {
 public:
  virtual ~ScorePrior() = default;

  virtual Waveform score(const Waveform& x, double sigma) = 0;

  // Score and denoised estimate together. The default derives the estimate
  // from the score; priors that know the denoiser output directly override it.
  virtual ScoreEstimate evaluate(const Waveform& x, double sigma);

  virtual std::string name() const = 0;
};

// N(mean, Sigma) convolved with N(0, sigma^2 I). Sigma is either diagonal or
// circulant; in both cases it is given by its eigenvalues (for circulant,
// the DFT of its first row, which must be real and symmetric).
class GaussianPrior : public ScorePrior {
 public:
  enum class Covariance { kDiagonal, kCirculant };

  GaussianPrior(Waveform mean, Eigen::VectorXd eigenvalues, Covariance kind);
  // Zero mean, identity covariance.
  static GaussianPrior standard(Eigen::Index length);

  Waveform score(const Waveform& x, double sigma) override;
  std::string name() const override { return "gaussian"; }

  const Waveform& mean() const { return mean_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  Covariance kind() const { return kind_; }

 private:
  Waveform mean_;
  Eigen::VectorXd eigenvalues_;
  Covariance kind_;
};

// Perfect denoiser for a known clean signal: the Tweedie estimate is exactly
// x_clean and score = (x_clean - x) / sigma^2.
class OracleDenoiserPrior : public ScorePrior {
 public:
  explicit OracleDenoiserPrior(Waveform clean) : clean_(std::move(clean)) {}

  Waveform score(const Waveform& x, double sigma) override;
  ScoreEstimate evaluate(const Waveform& x, double sigma) override;
  std::string name() const override { return "oracle"; }

 private:
  Waveform clean_;
};

// Score network hosted behind a USDP endpoint. Holds one connection,
// reconnecting and retrying once when the transport fails.
class RemoteScorePrior : public ScorePrior {
 public:
  explicit RemoteScorePrior(
      usdp::Endpoint endpoint,
      std::chrono::milliseconds timeout = std::chrono::seconds(30));
  // Endpoint from USDDPS_SCORE_ENDPOINT.
  static RemoteScorePrior from_environment(
      std::chrono::milliseconds timeout = std::chrono::seconds(30));

  Waveform score(const Waveform& x, double sigma) override;
  std::string name() const override { return "remote:" + endpoint_.to_string(); }

 private:
  usdp::Frame round_trip(const std::vector<std::uint8_t>& request);

  usdp::Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  usdp::Socket socket_;
};

}  // namespace usddps
