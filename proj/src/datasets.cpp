#include "diagan/datasets.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "diagan/errors.hpp"
#include "diagan/io.hpp"

namespace diagan {

std::string_view to_string(Group g) {
  switch (g) {
    case Group::major: return "major";
    case Group::minor: return "minor";
    case Group::neither: return "neither";
  }
  return "?";
}

namespace {

Group group_from_string(std::string_view s) {
  if (s == "major") return Group::major;
  if (s == "minor") return Group::minor;
  if (s == "neither") return Group::neither;
  throw IoError("unknown group label '" + std::string(s) + "'");
}

// Literal constants of the 25-Gaussian recipe, kept verbatim rather than sqrt(2).
constexpr double kGridScale = 2.828;
constexpr double kCenterScale = 1.414;
constexpr double kNoiseStd = 0.05;
constexpr int kGridOffsets[5] = {-4, -2, 0, 2, 4};

}  // namespace

bool LabeledDataset::has_modes() const {
  return !mode_index.empty() && mode_index.front() >= 0;
}

std::vector<std::size_t> LabeledDataset::indices_of(Group g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i] == g) out.push_back(i);
  }
  return out;
}

Matrix LabeledDataset::rows(const std::vector<std::size_t>& indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), points.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

GaussianMixtureSpec GaussianMixtureSpec::twenty_five() {
  GaussianMixtureSpec spec;
  for (int ix = 0; ix < 5; ++ix) {
    for (int iy = 0; iy < 5; ++iy) {
      spec.centers.emplace_back((ix - 2) / kCenterScale, (iy - 2) / kCenterScale);
    }
  }
  spec.component_std = kNoiseStd / kGridScale;
  return spec;
}

Group single_gaussian_group(double x, double y) {
  const double r = std::hypot(x, y);
  if (r <= 2.0) return Group::major;
  if (r >= 7.0) return Group::minor;
  return Group::neither;
}

double sigma_for_minority_level(int level) {
  switch (level) {
    case 1: return 3.0;
    case 2: return 2.5;
    case 3: return 2.0;
  }
  throw ParameterError("minority level must be 1, 2 or 3");
}

LabeledDataset gen_single_gaussian(double sigma, std::size_t n, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw ParameterError("gen_single_gaussian: sigma must be positive");
  if (n == 0) throw ParameterError("gen_single_gaussian: n must be positive");
  RngStream rng(seed, StreamId::dataset);
  LabeledDataset data;
  data.seed = seed;
  data.points.resize(static_cast<Eigen::Index>(n), 2);
  data.group.resize(n);
  data.mode_index.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sigma * rng.normal();
    const double y = sigma * rng.normal();
    data.points(static_cast<Eigen::Index>(i), 0) = x;
    data.points(static_cast<Eigen::Index>(i), 1) = y;
    data.group[i] = single_gaussian_group(x, y);
  }
  return data;
}

LabeledDataset gen_25_gaussians(std::size_t n, std::uint64_t seed) {
  if (n == 0 || n % 25 != 0) throw ParameterError("gen_25_gaussians: n must be a positive multiple of 25");
  RngStream rng(seed, StreamId::dataset);
  const std::size_t per_mode = n / 25;
  LabeledDataset data;
  data.seed = seed;
  data.points.resize(static_cast<Eigen::Index>(n), 2);
  data.group.assign(n, Group::neither);
  data.mode_index.resize(n);
  std::size_t row = 0;
  for (int ix = 0; ix < 5; ++ix) {
    for (int iy = 0; iy < 5; ++iy) {
      for (std::size_t j = 0; j < per_mode; ++j, ++row) {
        const double zx = kNoiseStd * rng.normal();
        const double zy = kNoiseStd * rng.normal();
        data.points(static_cast<Eigen::Index>(row), 0) = (kGridOffsets[ix] + zx) / kGridScale;
        data.points(static_cast<Eigen::Index>(row), 1) = (kGridOffsets[iy] + zy) / kGridScale;
        data.mode_index[row] = 5 * ix + iy;
      }
    }
  }
  return data;
}

int assign_mode(const Eigen::Vector2d& point, const GaussianMixtureSpec& spec) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < spec.centers.size(); ++j) {
    const double d2 = (point - spec.centers[j]).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(j);
    }
  }
  if (best < 0) throw ParameterError("assign_mode: mixture has no centers");
  return best;
}

void write_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "x,y,group,mode_index\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << format_double(data.points(r, 0)) << ',' << format_double(data.points(r, 1)) << ','
        << to_string(data.group[i]) << ',' << data.mode_index[i] << '\n';
  }
  write_text_file(path, out.str());
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto cx = table.column("x"), cy = table.column("y");
  const auto cg = table.column("group"), cm = table.column("mode_index");
  LabeledDataset data;
  data.points.resize(static_cast<Eigen::Index>(table.rows.size()), 2);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    data.points(static_cast<Eigen::Index>(i), 0) = parse_double(row[cx]);
    data.points(static_cast<Eigen::Index>(i), 1) = parse_double(row[cy]);
    data.group.push_back(group_from_string(row[cg]));
    data.mode_index.push_back(static_cast<int>(parse_long(row[cm])));
  }
  return data;
}

}  // namespace diagan
