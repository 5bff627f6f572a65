#include "diagan/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "diagan/errors.hpp"
#include "diagan/io.hpp"

namespace diagan {

double ldr(double d_output) {
  if (!(d_output > 0.0 && d_output < 1.0)) {
    throw DomainError("ldr: discriminator output must lie in (0, 1), got " + format_double(d_output));
  }
  return std::log(d_output / (1.0 - d_output));
}

double ldrm(std::span<const double> row) {
  if (row.empty()) throw InsufficientWindow("ldrm: empty record window");
  return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

double ldrv(std::span<const double> row) {
  if (row.size() < 2) throw InsufficientWindow("ldrv: needs at least 2 records");
  const double mean = ldrm(row);
  double ss = 0.0;
  for (double v : row) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(row.size() - 1);
}

double discrepancy_score(double ldrm_value, double ldrv_value, double k) {
  if (ldrv_value < 0.0) throw DomainError("discrepancy_score: negative LDRV");
  return ldrm_value + k * std::sqrt(ldrv_value);
}

double hinge_statistics(std::span<const double> dh_row, double k) {
  return discrepancy_score(ldrm(dh_row), ldrv(dh_row), k);
}

std::vector<double> clip_scores(std::span<const double> raw, ClipRule rule) {
  if (raw.empty()) return {};
  std::vector<double> out(raw.begin(), raw.end());
  for (double& v : out) v = std::max(v, rule.floor);
  const double cap = rule.max_ratio * *std::min_element(out.begin(), out.end());
  for (double& v : out) v = std::min(v, cap);
  return out;
}

std::vector<double> sampling_frequency(std::span<const double> clipped) {
  const double total = std::accumulate(clipped.begin(), clipped.end(), 0.0);
  std::vector<double> out(clipped.begin(), clipped.end());
  for (double& v : out) v /= total;
  return out;
}

void LdrLog::append(long step, const Vector& values) {
  if (static_cast<std::size_t>(values.size()) != n_) {
    throw ShapeError("LdrLog::append: expected " + std::to_string(n_) + " values");
  }
  if (!steps_.empty() && step <= steps_.back()) {
    throw ContractViolation("LdrLog::append: record steps must increase");
  }
  if (!values.allFinite()) throw ContractViolation("LdrLog::append: non-finite LDR value");
  steps_.push_back(step);
  columns_.push_back(values);
}

std::vector<double> LdrLog::row(std::size_t sample) const {
  std::vector<double> out(columns_.size());
  const auto i = static_cast<Eigen::Index>(sample);
  for (std::size_t k = 0; k < columns_.size(); ++k) out[k] = columns_[k][i];
  return out;
}

LdrLog LdrLog::last(std::size_t window) const {
  if (window == 0 || window >= steps_.size()) return *this;
  LdrLog out(n_);
  const std::size_t start = steps_.size() - window;
  out.steps_.assign(steps_.begin() + static_cast<long>(start), steps_.end());
  out.columns_.assign(columns_.begin() + static_cast<long>(start), columns_.end());
  return out;
}

std::vector<double> LdrLog::ldrm_all() const {
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = ldrm(row(i));
  return out;
}

std::vector<double> LdrLog::ldrv_all() const {
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = ldrv(row(i));
  return out;
}

void LdrLog::write_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "sample";
  for (long s : steps_) out << ',' << s;
  out << '\n';
  for (std::size_t i = 0; i < n_; ++i) {
    out << i;
    for (const auto& col : columns_) out << ',' << format_double(col[static_cast<Eigen::Index>(i)]);
    out << '\n';
  }
  write_text_file(path, out.str());
}

LdrLog LdrLog::read_csv(const std::filesystem::path& path) {
  const CsvTable table = diagan::read_csv(path);
  if (table.header.empty() || table.header.front() != "sample") {
    throw IoError("LDR log must start with a 'sample' column: " + path.string());
  }
  LdrLog log(table.rows.size());
  for (std::size_t k = 1; k < table.header.size(); ++k) {
    Vector col(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      col[static_cast<Eigen::Index>(i)] = parse_double(table.rows[i][k]);
    }
    log.append(parse_long(table.header[k]), col);
  }
  return log;
}

bool LdrLog::operator==(const LdrLog& other) const {
  if (n_ != other.n_ || steps_ != other.steps_) return false;
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    if (columns_[k] != other.columns_[k]) return false;
  }
  return true;
}

void ScoreTable::write_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "index,raw,clipped,p_s\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out << i << ',' << format_double(raw[i]) << ',' << format_double(clipped[i]) << ','
        << format_double(frequency[i]) << '\n';
  }
  write_text_file(path, out.str());
}

ScoreTable ScoreTable::read_csv(const std::filesystem::path& path, double k) {
  const CsvTable table = diagan::read_csv(path);
  const auto c_raw = table.column("raw"), c_clip = table.column("clipped"), c_p = table.column("p_s");
  ScoreTable t;
  t.k = k;
  for (const auto& row : table.rows) {
    t.raw.push_back(parse_double(row[c_raw]));
    t.clipped.push_back(parse_double(row[c_clip]));
    t.frequency.push_back(parse_double(row[c_p]));
  }
  return t;
}

ScoreTable compute_scores(const LdrLog& log, double k, ClipRule rule) {
  if (log.record_count() < 2) {
    throw InsufficientWindow("compute_scores: LDR log needs at least 2 records, has " +
                             std::to_string(log.record_count()));
  }
  ScoreTable table;
  table.k = k;
  table.raw.resize(log.sample_count());
  for (std::size_t i = 0; i < log.sample_count(); ++i) {
    const auto row = log.row(i);
    table.raw[i] = discrepancy_score(ldrm(row), ldrv(row), k);
  }
  table.clipped = clip_scores(table.raw, rule);
  table.frequency = sampling_frequency(table.clipped);
  return table;
}

SamplingDistribution::SamplingDistribution(std::span<const double> probabilities, double tolerance) {
  if (probabilities.empty()) throw ContractViolation("SamplingDistribution: empty distribution");
  cdf_.resize(probabilities.size());
  double running = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ContractViolation("SamplingDistribution: probabilities must be finite and non-negative");
    }
    running += p;
    cdf_[i] = running;
  }
  if (std::abs(running - 1.0) > tolerance) {
    throw ContractViolation("SamplingDistribution: probabilities sum to " + format_double(running) +
                            ", expected 1");
  }
}

SamplingDistribution SamplingDistribution::uniform(std::size_t n) {
  if (n == 0) throw ContractViolation("SamplingDistribution: empty distribution");
  SamplingDistribution dist;
  dist.cdf_.resize(n);
  for (std::size_t i = 0; i < n; ++i) dist.cdf_[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return dist;
}

double SamplingDistribution::probability(std::size_t i) const {
  return i == 0 ? cdf_[0] : cdf_[i] - cdf_[i - 1];
}

std::size_t SamplingDistribution::draw(RngStream& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = static_cast<std::size_t>(it - cdf_.begin());
  return std::min(idx, cdf_.size() - 1);
}

std::vector<std::size_t> draw_batch(const SamplingDistribution& dist, std::size_t batch_size, RngStream& rng) {
  std::vector<std::size_t> out(batch_size);
  for (auto& i : out) i = dist.draw(rng);
  return out;
}

}  // namespace diagan
