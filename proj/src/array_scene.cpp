// SPDX-License-Identifier: Apache-2.0
#include "dfrc/array_scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dfrc {

void ArrayConfig::validate() const {
  if (n_tx < 1 || n_rx < 1 || n_rf < 1) throw std::invalid_argument("array sizes must be >= 1");
  if (n_rf > n_tx) throw std::invalid_argument("n_rf must not exceed n_tx");
  if (n_rx > n_tx) throw std::invalid_argument("n_rx must not exceed n_tx");
  if (spacing_over_wavelength <= 0.0)
    throw std::invalid_argument("spacing_over_wavelength must be positive");
}

std::vector<double> Scene::comm_aod_deg() const {
  return {target_angles_deg.begin(), target_angles_deg.begin() + comm_path_count};
}

void Scene::validate() const {
  const int k = k_targets();
  if (static_cast<int>(target_gains.size()) != k)
    throw std::invalid_argument("scene: one gain required per target");
  if (comm_path_count < 0 || comm_path_count > k)
    throw std::invalid_argument("scene: comm_path_count must be in [0, K]");
  if (static_cast<int>(ue_aoas_deg.size()) != comm_path_count ||
      static_cast<int>(comm_gains.size()) != comm_path_count)
    throw std::invalid_argument("scene: L arrival angles and L comm gains required");
  for (double a : target_angles_deg)
    if (a < -90.0 || a > 90.0) throw std::invalid_argument("scene: target angle outside [-90, 90]");
  for (double a : ue_aoas_deg)
    if (a < -90.0 || a > 90.0) throw std::invalid_argument("scene: UE angle outside [-90, 90]");
}

void NoiseConfig::validate() const {
  if (sigma2_radar < 0.0 || sigma2_dl < 0.0 || sigma2_ul < 0.0)
    throw std::invalid_argument("noise variances must be non-negative");
}

CVector steering_vector(double angle_deg, int n_elements, double spacing_over_wavelength) {
  if (n_elements < 1) throw std::invalid_argument("steering_vector: n_elements must be >= 1");
  CVector a(n_elements);
  const double phase_step = 2.0 * kPi * spacing_over_wavelength * std::sin(deg2rad(angle_deg));
  for (int m = 0; m < n_elements; ++m)
    a(m) = std::polar(1.0, phase_step * static_cast<double>(m));
  return a;
}

CMatrix steering_matrix(const std::vector<double>& angles_deg, int n_elements,
                        double spacing_over_wavelength) {
  CMatrix a(n_elements, static_cast<Eigen::Index>(angles_deg.size()));
  for (std::size_t i = 0; i < angles_deg.size(); ++i)
    a.col(static_cast<Eigen::Index>(i)) =
        steering_vector(angles_deg[i], n_elements, spacing_over_wavelength);
  return a;
}

namespace {

// k distinct slice centers of [-90, 90] split into `slices` pieces.
std::vector<double> draw_grid_angles(int k, int slices, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(slices));
  std::iota(idx.begin(), idx.end(), 0);
  const double step = 180.0 / static_cast<double>(slices);
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    const std::size_t j = pick(rng);
    angles.push_back(-90.0 + (static_cast<double>(idx[j]) + 0.5) * step);
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return angles;
}

std::vector<cd> draw_gains(int n, Rng& rng) {
  std::vector<cd> g(static_cast<std::size_t>(n));
  for (auto& v : g) v = sample_cn(rng, 1.0);
  return g;
}

}  // namespace

Scene generate_scene(int k_targets, int l_paths, int grid_slices, Rng& rng) {
  if (k_targets < 1) throw std::invalid_argument("generate_scene: need at least one target");
  if (l_paths < 0 || l_paths > k_targets)
    throw std::invalid_argument("generate_scene: need 0 <= L <= K");
  if (grid_slices < k_targets)
    throw std::invalid_argument("generate_scene: more targets than grid slices");
  Scene s;
  s.target_angles_deg = draw_grid_angles(k_targets, grid_slices, rng);
  s.target_gains = draw_gains(k_targets, rng);
  s.comm_path_count = l_paths;
  s.ue_aoas_deg = draw_grid_angles(l_paths, grid_slices, rng);
  s.comm_gains = draw_gains(l_paths, rng);
  s.validate();
  return s;
}

CMatrix echo_matrix(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x) {
  if (x.rows() != arrays.n_tx) throw std::invalid_argument("echo_matrix: x must have n_tx rows");
  const CMatrix a = steering_matrix(scene.target_angles_deg, arrays.n_tx,
                                    arrays.spacing_over_wavelength);
  CVector alpha(scene.k_targets());
  for (int k = 0; k < scene.k_targets(); ++k) alpha(k) = scene.target_gains[static_cast<std::size_t>(k)];
  return a * alpha.asDiagonal() * (a.transpose() * x);
}

CMatrix radar_echo(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x,
                   const NoiseConfig& noise) {
  noise.validate();
  CMatrix y = echo_matrix(scene, arrays, x);
  if (noise.sigma2_radar > 0.0) {
    Rng rng = make_rng(noise.rng_seed, {1u});
    y += cn_matrix(y.rows(), y.cols(), noise.sigma2_radar, rng);
  }
  return y;
}

CMatrix dl_channel(const Scene& scene, const ArrayConfig& arrays) {
  scene.validate();
  const CMatrix b = steering_matrix(scene.ue_aoas_deg, arrays.n_rx, arrays.spacing_over_wavelength);
  const CMatrix a1 =
      steering_matrix(scene.comm_aod_deg(), arrays.n_tx, arrays.spacing_over_wavelength);
  CVector beta(scene.comm_path_count);
  for (int l = 0; l < scene.comm_path_count; ++l) beta(l) = scene.comm_gains[static_cast<std::size_t>(l)];
  return b * beta.asDiagonal() * a1.transpose();
}

CMatrix dl_received(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x,
                    const NoiseConfig& noise) {
  if (x.rows() != arrays.n_tx) throw std::invalid_argument("dl_received: x must have n_tx rows");
  noise.validate();
  CMatrix y = dl_channel(scene, arrays) * x;
  if (noise.sigma2_dl > 0.0) {
    Rng rng = make_rng(noise.rng_seed, {2u});
    y += cn_matrix(y.rows(), y.cols(), noise.sigma2_dl, rng);
  }
  return y;
}

CMatrix ul_matrix(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x_ul) {
  if (x_ul.rows() != arrays.n_rx) throw std::invalid_argument("ul_matrix: x must have n_rx rows");
  const CMatrix b = steering_matrix(scene.ue_aoas_deg, arrays.n_rx, arrays.spacing_over_wavelength);
  const CMatrix a1 =
      steering_matrix(scene.comm_aod_deg(), arrays.n_tx, arrays.spacing_over_wavelength);
  CVector beta(scene.comm_path_count);
  for (int l = 0; l < scene.comm_path_count; ++l) beta(l) = scene.comm_gains[static_cast<std::size_t>(l)];
  return a1 * beta.asDiagonal() * (b.transpose() * x_ul);
}

CMatrix ul_received(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x_ul,
                    const NoiseConfig& noise) {
  noise.validate();
  CMatrix y = ul_matrix(scene, arrays, x_ul);
  if (noise.sigma2_ul > 0.0) {
    Rng rng = make_rng(noise.rng_seed, {3u});
    y += cn_matrix(y.rows(), y.cols(), noise.sigma2_ul, rng);
  }
  return y;
}

namespace {

void write_values(std::ostream& os, const std::string& key, const std::vector<double>& v) {
  os << key << ":";
  os << std::setprecision(17);
  for (double x : v) os << " " << x;
  os << "\n";
}

std::vector<double> parse_values(const std::string& line) {
  std::istringstream iss(line);
  std::vector<double> v;
  double x = 0.0;
  while (iss >> x) v.push_back(x);
  return v;
}

}  // namespace

void save_scene(const Scene& scene, const std::string& path) {
  scene.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_scene: cannot open " + path);
  std::vector<double> gre, gim, cre, cim;
  for (cd g : scene.target_gains) {
    gre.push_back(g.real());
    gim.push_back(g.imag());
  }
  for (cd g : scene.comm_gains) {
    cre.push_back(g.real());
    cim.push_back(g.imag());
  }
  write_values(os, "angles_deg", scene.target_angles_deg);
  write_values(os, "gains_re", gre);
  write_values(os, "gains_im", gim);
  os << "comm_path_count: " << scene.comm_path_count << "\n";
  write_values(os, "ue_aoas_deg", scene.ue_aoas_deg);
  write_values(os, "comm_gains_re", cre);
  write_values(os, "comm_gains_im", cim);
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("load_scene: cannot open " + path);
  Scene s;
  std::vector<double> gre, gim, cre, cim;
  std::string line;
  while (std::getline(is, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    const std::string rest = line.substr(colon + 1);
    if (key == "angles_deg")
      s.target_angles_deg = parse_values(rest);
    else if (key == "gains_re")
      gre = parse_values(rest);
    else if (key == "gains_im")
      gim = parse_values(rest);
    else if (key == "comm_path_count")
      s.comm_path_count = static_cast<int>(parse_values(rest).at(0));
    else if (key == "ue_aoas_deg")
      s.ue_aoas_deg = parse_values(rest);
    else if (key == "comm_gains_re")
      cre = parse_values(rest);
    else if (key == "comm_gains_im")
      cim = parse_values(rest);
    else
      throw std::invalid_argument("load_scene: unknown key '" + key + "'");
  }
  if (gre.size() != gim.size() || cre.size() != cim.size())
    throw std::invalid_argument("load_scene: mismatched re/im lengths");
  for (std::size_t i = 0; i < gre.size(); ++i) s.target_gains.emplace_back(gre[i], gim[i]);
  for (std::size_t i = 0; i < cre.size(); ++i) s.comm_gains.emplace_back(cre[i], cim[i]);
  s.validate();
  return s;
}

}  // namespace dfrc
