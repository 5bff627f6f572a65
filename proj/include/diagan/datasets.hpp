#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "diagan/numcore.hpp"

namespace diagan {

enum class Group : std::int8_t { neither = 0, major = 1, minor = 2 };

std::string_view to_string(Group g);

/// Two-dimensional point set with per-point group label and mixture mode.
struct LabeledDataset {
  Matrix points;                 // n x 2
  std::vector<Group> group;      // per point
  std::vector<int> mode_index;   // per point, -1 when the dataset has no modes
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  bool has_modes() const;
  std::vector<std::size_t> indices_of(Group g) const;
  Matrix rows(const std::vector<std::size_t>& indices) const;
};

struct GaussianMixtureSpec {
  std::vector<Eigen::Vector2d> centers;
  double component_std = 0.0;

  /// The 5x5 grid: centers (c_x, c_y) for c in {-2,-1,0,1,2}/1.414, per-axis
  /// std 0.05/2.828. Center j has j = 5*i_x + i_y.
  static GaussianMixtureSpec twenty_five();

  /// Distance under which a sample counts as high quality: 4 component stds.
  double high_quality_radius() const { return 4.0 * component_std; }
};

/// Single-mode isotropic Gaussian N(0, sigma^2 I). Minority levels 1, 2, 3
/// correspond to sigma = 3, 2.5, 2.
LabeledDataset gen_single_gaussian(double sigma, std::size_t n, std::uint64_t seed);

/// Group rule of the single-mode dataset: major iff |x| <= 2, minor iff |x| >= 7.
Group single_gaussian_group(double x, double y);

double sigma_for_minority_level(int level);

/// 25-mode grid, n/25 points per mode, (x, y) = ((d_x, d_y) + (z_x, z_y)) / 2.828
/// with d in {-4,-2,0,2,4} and z ~ N(0, 0.05^2). Points are ordered by mode.
LabeledDataset gen_25_gaussians(std::size_t n, std::uint64_t seed);

/// Nearest center by Euclidean distance; ties go to the lowest index.
int assign_mode(const Eigen::Vector2d& point, const GaussianMixtureSpec& spec);

/// CSV with columns x,y,group,mode_index.
void write_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path);
LabeledDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace diagan
