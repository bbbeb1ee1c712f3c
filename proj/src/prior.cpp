#include "usddps/prior.hpp"

#include <cstdlib>
#include <sstream>
#include <vector>

#include "usddps/errors.hpp"
#include "usddps/fft.hpp"

namespace usddps {

ScoreEstimate ScorePrior::evaluate(const Waveform& x, double sigma) {
  ScoreEstimate out{score(x, sigma), {}};
  out.denoised = x + sigma * sigma * out.score;
  return out;
}

GaussianPrior::GaussianPrior(Waveform mean, Eigen::VectorXd eigenvalues,
                             Covariance kind)
    : mean_(std::move(mean)), eigenvalues_(std::move(eigenvalues)), kind_(kind) {
  const Eigen::Index n = mean_.size();
  if (n < 1) throw InvalidInput("Gaussian prior needs a non-empty mean");
  if (eigenvalues_.size() != n)
    throw ShapeError("Gaussian prior: eigenvalue count must equal signal length");
  if (!(eigenvalues_.minCoeff() >= 0.0))
    throw InvalidInput("Gaussian prior: covariance eigenvalues must be >= 0");
  if (kind_ == Covariance::kCirculant) {
    for (Eigen::Index k = 1; k < n; ++k)
      if (eigenvalues_[k] != eigenvalues_[n - k])
        throw InvalidInput("circulant eigenvalues must satisfy l[k] == l[n-k]");
  }
}

GaussianPrior GaussianPrior::standard(Eigen::Index length) {
  return GaussianPrior(Waveform::Zero(length), Eigen::VectorXd::Ones(length),
                       Covariance::kDiagonal);
}

Waveform GaussianPrior::score(const Waveform& x, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("score: sigma must be positive");
  if (x.size() != mean_.size())
    throw ShapeError("Gaussian prior: input length does not match the mean");
  const double s2 = sigma * sigma;
  const Waveform centered = x - mean_;
  if (kind_ == Covariance::kDiagonal)
    return -(centered.array() / (eigenvalues_.array() + s2)).matrix();

  const int n = static_cast<int>(x.size());
  RealFft fft(n);
  std::vector<Complex> spec(fft.num_bins());
  fft.forward({centered.data(), static_cast<std::size_t>(n)}, spec);
  for (int k = 0; k < fft.num_bins(); ++k) spec[k] /= eigenvalues_[k] + s2;
  Waveform out(n);
  fft.inverse(spec, {out.data(), static_cast<std::size_t>(n)});
  return -out / static_cast<double>(n);
}

Waveform OracleDenoiserPrior::score(const Waveform& x, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("score: sigma must be positive");
  if (x.size() != clean_.size())
    throw ShapeError("oracle prior: input length does not match the clean signal");
  return (clean_ - x) / (sigma * sigma);
}

ScoreEstimate OracleDenoiserPrior::evaluate(const Waveform& x, double sigma) {
  return {score(x, sigma), clean_};
}

RemoteScorePrior::RemoteScorePrior(usdp::Endpoint endpoint,
                                   std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

RemoteScorePrior RemoteScorePrior::from_environment(std::chrono::milliseconds timeout) {
  const char* env = std::getenv("USDDPS_SCORE_ENDPOINT");
  if (!env || !*env)
    throw InvalidInput("USDDPS_SCORE_ENDPOINT is not set and no endpoint was given");
  return RemoteScorePrior(usdp::Endpoint::parse(env), timeout);
}

usdp::Frame RemoteScorePrior::round_trip(const std::vector<std::uint8_t>& request) {
  for (int attempt = 0;; ++attempt) {
    try {
      if (!socket_.valid()) socket_ = usdp::Socket::connect(endpoint_, timeout_);
      socket_.send_all(request);
      return usdp::read_frame(socket_);
    } catch (const usdp::TimeoutError&) {
      socket_.close();
      throw;
    } catch (const usdp::TransportError&) {
      socket_.close();
      if (attempt >= 1) throw;
    } catch (const usdp::ProtocolError&) {
      socket_.close();
      throw;
    }
  }
}

Waveform RemoteScorePrior::score(const Waveform& x, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("score: sigma must be positive");
  std::vector<float> samples(x.data(), x.data() + x.size());
  const auto request = usdp::encode_request(sigma, samples);
  auto context = [&] {
    std::ostringstream os;
    os << " (endpoint " << endpoint_.to_string() << ", sigma " << sigma << ")";
    return os.str();
  };
  usdp::Frame reply;
  try {
    reply = round_trip(request);
  } catch (const usdp::TimeoutError& e) {
    throw usdp::TimeoutError(e.what() + context());
  } catch (const usdp::TransportError& e) {
    throw usdp::TransportError(e.what() + context());
  }
  switch (reply.header.type) {
    case usdp::MessageType::kError:
      throw usdp::ServerError("score server error: " +
                              usdp::decode_error(reply.payload) + context());
    case usdp::MessageType::kResponse:
      break;
    default:
      socket_.close();
      throw usdp::ProtocolError("expected a response frame" + context(), 5);
  }
  const std::vector<float> values = usdp::decode_response(reply.payload);
  if (static_cast<Eigen::Index>(values.size()) != x.size())
    throw usdp::ProtocolError("response length " + std::to_string(values.size()) +
                                  " does not match request length " +
                                  std::to_string(x.size()) + context(),
                              usdp::kHeaderSize);
  Waveform out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = values[i];
  return out;
}

}  // namespace usddps
