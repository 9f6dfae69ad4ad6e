#include "lumenreg/poses.hpp"

#include "lumenreg/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace lumenreg {

void PoseLog::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (!(samples[i].timestamp > samples[i - 1].timestamp))
      throw InvalidArgument("pose log timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
}

bool PoseLog::has_gaps() const {
  for (const auto& s : samples)
    if (!s.pose) return true;
  return false;
}

std::vector<HomogeneousTransform> PoseLog::poses() const {
  std::vector<HomogeneousTransform> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].pose) throw InvalidArgument("pose log sample " + std::to_string(i) + " is missing");
    out.push_back(*samples[i].pose);
  }
  return out;
}

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0 && sbb > 0.0)) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

bool constant(std::span<const double> s) {
  for (double v : s)
    if (v != s[0]) return false;
  return true;
}

}  // namespace

SyncResult synchronize(std::span<const double> a, std::span<const double> b, int max_lag) {
  if (max_lag < 0) throw InvalidArgument("max_lag must be nonnegative");
  const auto min_len = static_cast<std::size_t>(std::max(2, 2 * max_lag));
  if (a.size() < min_len || b.size() < min_len)
    throw InvalidArgument("series must hold at least 2 * max_lag samples");
  for (double v : a)
    if (!std::isfinite(v)) throw InvalidArgument("flow magnitude series has non-finite values");
  for (double v : b)
    if (!std::isfinite(v)) throw InvalidArgument("pose displacement series has non-finite values");
  if (constant(a) || constant(b)) throw NoSignal("constant series carries no synchronization signal");

  const auto na = static_cast<long>(a.size()), nb = static_cast<long>(b.size());
  SyncResult best;
  best.peak_correlation = -2.0;
  // Visit lags by increasing |lag| so strict improvement keeps the smaller one.
  for (int k = 0; k <= 2 * max_lag; ++k) {
    const int lag = (k % 2 == 1) ? (k + 1) / 2 : -(k / 2);
    const long begin = std::max(0L, -static_cast<long>(lag));
    const long end = std::min(na, nb - lag);
    if (end - begin < 2) continue;
    const double c = pearson(a.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin)),
                             b.subspan(static_cast<std::size_t>(begin + lag), static_cast<std::size_t>(end - begin)));
    if (c > best.peak_correlation) {
      best.peak_correlation = c;
      best.offset = lag;
    }
  }
  best.low_confidence = best.peak_correlation < 0.5;
  return best;
}

std::vector<double> resample_linear(std::span<const double> series, double from_hz, double to_hz) {
  if (!(from_hz > 0.0 && to_hz > 0.0)) throw InvalidArgument("rates must be positive");
  if (series.empty()) return {};
  const double span_s = (series.size() - 1) / from_hz;
  const auto n = static_cast<std::size_t>(std::floor(span_s * to_hz + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double pos = j / to_hz * from_hz;
    const auto i0 = std::min(static_cast<std::size_t>(pos), series.size() - 1);
    const auto i1 = std::min(i0 + 1, series.size() - 1);
    const double f = pos - static_cast<double>(i0);
    out[j] = (1.0 - f) * series[i0] + f * series[i1];
  }
  return out;
}

std::vector<double> pose_displacement(std::span<const HomogeneousTransform> poses) {
  std::vector<double> out(poses.size(), 0.0);
  for (std::size_t i = 1; i < poses.size(); ++i)
    out[i] = (poses[i].translation() - poses[i - 1].translation()).norm();
  return out;
}

HomogeneousTransform solve_handeye(
    std::span<const std::pair<HomogeneousTransform, HomogeneousTransform>> pairs) {
  if (pairs.size() < 3) throw InvalidArgument("hand-eye calibration needs at least 3 pose pairs");

  std::vector<HomogeneousTransform> ra, rb;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      ra.push_back(pairs[i].first.inverse() * pairs[j].first);
      rb.push_back(pairs[i].second.inverse() * pairs[j].second);
    }

  // log(R_A) = R_X log(R_B): orthogonal Procrustes over the rotation vectors.
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const Eigen::AngleAxisd aa(ra[k].rotation()), ab(rb[k].rotation());
    h += (ab.angle() * ab.axis()) * (aa.angle() * aa.axis()).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-6 * sv[0])
    throw RankDeficient("hand-eye motions need rotation axes spanning at least two directions (axes are parallel)");
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Eigen::Matrix3d rx = svd.matrixV() * d * svd.matrixU().transpose();

  // (R_A - I) t_X = R_X t_B - t_A.
  Eigen::MatrixXd m(3 * ra.size(), 3);
  Eigen::VectorXd rhs(3 * ra.size());
  for (std::size_t k = 0; k < ra.size(); ++k) {
    m.block<3, 3>(static_cast<Eigen::Index>(3 * k), 0) = ra[k].rotation() - Eigen::Matrix3d::Identity();
    rhs.segment<3>(static_cast<Eigen::Index>(3 * k)) = rx * rb[k].translation() - ra[k].translation();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> ls(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd lsv = ls.singularValues();
  if (lsv[2] <= 1e-9 * lsv[0]) throw RankDeficient("hand-eye translation system is rank deficient");
  const Eigen::Vector3d tx = ls.solve(rhs);
  return HomogeneousTransform::from_rt(orthonormalize(rx), tx);
}

HomogeneousTransform robot_to_camera(const HomogeneousTransform& a_i, const HomogeneousTransform& x,
                                     const HomogeneousTransform& a_cal, const HomogeneousTransform& b_cal) {
  return b_cal * x.inverse() * a_cal.inverse() * a_i * x;
}

std::vector<int> sample_keyframes(int frame_count, int keyframe_count) {
  if (keyframe_count < 1) throw InvalidArgument("keyframe count must be at least 1");
  if (keyframe_count > frame_count) throw InvalidArgument("keyframe count exceeds frame count");
  const int stride = frame_count / keyframe_count;
  std::vector<int> idx(static_cast<std::size_t>(keyframe_count));
  for (int i = 0; i < keyframe_count; ++i) idx[static_cast<std::size_t>(i)] = i * stride;
  return idx;
}

PoseLog interpolate_gaps(const PoseLog& log) {
  log.validate();
  if (log.samples.empty()) return log;
  if (!log.samples.front().pose || !log.samples.back().pose)
    throw InvalidArgument("cannot interpolate a leading or trailing pose gap");
  PoseLog out = log;
  std::size_t prev = 0;
  for (std::size_t i = 1; i < out.samples.size(); ++i) {
    if (out.samples[i].pose) {
      prev = i;
      continue;
    }
    std::size_t next = i + 1;
    while (!log.samples[next].pose) ++next;
    const auto& p = *log.samples[prev].pose;
    const auto& q = *log.samples[next].pose;
    const double s = (log.samples[i].timestamp - log.samples[prev].timestamp) /
                     (log.samples[next].timestamp - log.samples[prev].timestamp);
    const Eigen::Quaterniond qa(p.rotation()), qb(q.rotation());
    const Eigen::Matrix3d r = qa.slerp(s, qb).normalized().toRotationMatrix();
    const Eigen::Vector3d t = (1.0 - s) * p.translation() + s * q.translation();
    out.samples[i].pose = HomogeneousTransform::from_rt(r, t);
  }
  return out;
}

}  // namespace lumenreg
