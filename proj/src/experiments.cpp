// SPDX-License-Identifier: Apache-2.0
#include "dfrc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dfrc/metrics.hpp"
#include "dfrc/pilot_waveform.hpp"

namespace dfrc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint32_t fig_tag(ExperimentId id) { return static_cast<std::uint32_t>(id) + 10u; }

double snr_db_to_sigma2(double snr_db, double power) {
  return power * std::pow(10.0, -snr_db / 10.0);
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name,
                       std::vector<std::string>* files) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = (std::filesystem::path(cfg.out_dir) / name).string();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << std::setprecision(17);
  if (files) files->push_back(path);
  return os;
}

void write_series_csv(const MetricSeries& s, const ExperimentConfig& cfg, const std::string& name,
                      std::vector<std::string>* files) {
  std::ofstream os = open_out(cfg, name, files);
  os << "# figure=" << to_string(cfg.experiment_id) << " metric=" << s.metric_name
     << " x=" << s.x_name << " trials=" << cfg.trials << " seed=" << cfg.seed << "\n";
  os << "# snr_definition=P_over_sigma2_per_link,P_normalized=1\n";
  os << "x,variant,statistic,value\n";
  for (std::size_t xi = 0; xi < s.x_values.size(); ++xi)
    for (const std::string& v : s.variants) {
      os << s.x_values[xi] << "," << v << ",mean," << s.mean.at(v)[xi] << "\n";
      os << s.x_values[xi] << "," << v << ",stderr," << s.se.at(v)[xi] << "\n";
      os << s.x_values[xi] << "," << v << ",trials_ok," << s.n_ok.at(v)[xi] << "\n";
    }
}

void maybe_write_gnuplot(const ExperimentConfig& cfg, const std::string& csv_name,
                         const MetricSeries& s, std::vector<std::string>* files) {
  if (!cfg.emit_gnuplot) return;
  const std::string base = csv_name.substr(0, csv_name.rfind('.'));
  std::ofstream os = open_out(cfg, base + ".gp", files);
  os << "set datafile separator ','\n";
  os << "set xlabel '" << s.x_name << "'\n";
  os << "set ylabel '" << s.metric_name << "'\n";
  os << "set key outside\n";
  os << "plot ";
  for (std::size_t i = 0; i < s.variants.size(); ++i) {
    if (i) os << ", \\\n     ";
    os << "'< grep \"," << s.variants[i] << ",mean,\" " << csv_name
       << "' using 1:4 with linespoints title '" << s.variants[i] << "'";
  }
  os << "\n";
}

// Per-trial samples per (variant, x-point); NaN marks a failed evaluation.
class SeriesBuilder {
 public:
  SeriesBuilder(std::string metric, std::string x_name, std::vector<double> x_values,
                std::vector<std::string> variants)
      : metric_(std::move(metric)),
        x_name_(std::move(x_name)),
        x_(std::move(x_values)),
        variants_(std::move(variants)) {
    for (const auto& v : variants_) samples_[v].resize(x_.size());
  }

  void add(const std::string& variant, std::size_t xi, double value) {
    if (std::isnan(value)) return;
    samples_.at(variant).at(xi).push_back(value);
  }

  MetricSeries finish() const {
    MetricSeries s;
    s.metric_name = metric_;
    s.x_name = x_name_;
    s.x_values = x_;
    s.variants = variants_;
    for (const auto& v : variants_) {
      for (std::size_t xi = 0; xi < x_.size(); ++xi) {
        const MeanStderr ms = mean_stderr(samples_.at(v)[xi]);
        s.mean[v].push_back(ms.n ? ms.mean : kNan);
        s.se[v].push_back(ms.se);
        s.n_ok[v].push_back(ms.n);
      }
    }
    return s;
  }

 private:
  std::string metric_, x_name_;
  std::vector<double> x_;
  std::vector<std::string> variants_;
  std::map<std::string, std::vector<std::vector<double>>> samples_;
};

Scene fixed_scene(std::vector<double> theta, std::vector<double> phi, Rng& gain_rng) {
  Scene s;
  s.target_angles_deg = std::move(theta);
  s.comm_path_count = static_cast<int>(phi.size());
  s.ue_aoas_deg = std::move(phi);
  s.target_gains.resize(s.target_angles_deg.size());
  for (auto& g : s.target_gains) g = sample_cn(gain_rng, 1.0);
  s.comm_gains.resize(s.ue_aoas_deg.size());
  for (auto& g : s.comm_gains) g = sample_cn(gain_rng, 1.0);
  s.validate();
  return s;
}

// Presentation scenes: two adjacent 2-deg target pairs for the search figure,
// a 1-deg pair for the low-SNR failure case, well-separated angles for the
// beampattern figure.
Scene case1_scene(Rng& rng) {
  return fixed_scene({-70.0, -40.0, -26.0, -24.0, 5.0, 25.0, 27.0, 55.0},
                     {-35.0, -10.0, 20.0, 50.0}, rng);
}
Scene case2_scene(Rng& rng) {
  return fixed_scene({-38.0, -37.0, -15.0, 8.0, 22.0, 40.0, 60.0, 75.0},
                     {-45.0, -12.0, 23.0, 52.0}, rng);
}
Scene beampattern_scene(Rng& rng) {
  return fixed_scene({-60.0, -40.0, -20.0, -5.0, 10.0, 25.0, 45.0, 65.0},
                     {-50.0, -15.0, 15.0, 55.0}, rng);
}

CMatrix h_tilde_from(const std::vector<double>& aods_deg, const std::vector<cd>& betas, int n_tx,
                     double spacing) {
  CVector b(static_cast<Eigen::Index>(betas.size()));
  for (std::size_t i = 0; i < betas.size(); ++i) b(static_cast<Eigen::Index>(i)) = betas[i];
  return b.asDiagonal() * steering_matrix(aods_deg, n_tx, spacing).transpose();
}

struct CsiPieces {
  CMatrix h_tilde;                // L x N_t reduced channel
  CMatrix b;                      // N_r x L UE steering
  std::vector<double> theta_all;  // beam directions for the analog part
};

CsiPieces perfect_csi(const Scene& sc, const ArrayConfig& a) {
  CsiPieces p;
  p.h_tilde = h_tilde_from(sc.comm_aod_deg(), sc.comm_gains, a.n_tx, a.spacing_over_wavelength);
  p.b = steering_matrix(sc.ue_aoas_deg, a.n_rx, a.spacing_over_wavelength);
  p.theta_all = sc.target_angles_deg;
  return p;
}

CsiPieces estimated_csi(const Stage1Report& rep, const ArrayConfig& a, int l_expected) {
  if (static_cast<int>(rep.ue_angles_deg.size()) != l_expected ||
      static_cast<int>(rep.comm_gains.size()) != l_expected)
    throw std::runtime_error("estimated_csi: path estimation degenerate");
  CsiPieces p;
  p.h_tilde =
      h_tilde_from(rep.comm_path_angles_deg, rep.comm_gains, a.n_tx, a.spacing_over_wavelength);
  p.b = steering_matrix(rep.ue_angles_deg, a.n_rx, a.spacing_over_wavelength);
  p.theta_all = rep.bs_angles_deg;
  return p;
}

// Spectral efficiencies of the three transmit designs on one channel. The
// fully digital ZF reference gets the same communication transmit power as
// the hybrid actually spends on its data streams, so the comparison isolates
// the structural loss of the hybrid architecture from power allocation.
struct VariantSe {
  double fd_zf = 0.0;
  double hbf_opt = 0.0;
  double hbf_null = 0.0;
  double value(Variant v) const {
    switch (v) {
      case Variant::fd_zf: return fd_zf;
      case Variant::hbf_opt: return hbf_opt;
      case Variant::hbf_null: return hbf_null;
    }
    return kNan;
  }
};

VariantSe all_variant_se(const CsiPieces& csi, const CMatrix& h_true, const ArrayConfig& arrays,
                         double power, double rho, double sigma2_dl) {
  const ZfPair zf = zf_pair(csi.h_tilde, csi.b);
  const HybridBeamformer opt = design_hybrid(csi.theta_all, zf.f_bs, AuxMode::zero, power,
                                             arrays.n_tx, arrays.spacing_over_wavelength);
  const HybridBeamformer nul = design_hybrid(csi.theta_all, zf.f_bs, AuxMode::nullspace, power,
                                             arrays.n_tx, arrays.spacing_over_wavelength);
  const auto l = zf.f_bs.cols();
  const double p_comm = (opt.f_rf * opt.f_bb.leftCols(l)).squaredNorm();
  VariantSe se;
  se.fd_zf = dl_se_digital(h_true, zf.w_ue,
                           fd_zf_precoder(zf.f_bs, p_comm, static_cast<int>(l)), rho, sigma2_dl)
                 .se_bits_per_hz;
  se.hbf_opt = dl_se(h_true, zf.w_ue, opt.f_rf, opt.f_bb, rho, sigma2_dl).se_bits_per_hz;
  se.hbf_null = dl_se(h_true, zf.w_ue, nul.f_rf, nul.f_bb, rho, sigma2_dl).se_bits_per_hz;
  return se;
}

Stage1Report stage1_at(const ExperimentConfig& cfg, const Scene& scene, double sigma2,
                       int t_pilot, std::uint64_t noise_seed, Rng& rng) {
  NoiseConfig noise{sigma2, sigma2, sigma2, noise_seed};
  Stage1Options opt;
  opt.t_pilot = t_pilot;
  opt.power = cfg.power;
  return run_stage1(scene, cfg.arrays, noise, opt, rng);
}

CMatrix radar_estimate(const Stage1Report& rep, const ArrayConfig& a) {
  return radar_channel_matrix(rep.bs_angles_deg, rep.bs_gains, a.n_tx, a.spacing_over_wavelength);
}

CMatrix comm_estimate(const Stage1Report& rep, const ArrayConfig& a) {
  return comm_channel_matrix(rep.ue_angles_deg, rep.comm_gains, rep.comm_path_angles_deg, a.n_rx,
                             a.n_tx, a.spacing_over_wavelength);
}

// ---------------------------------------------------------------------------
// stage-3 trial machinery

struct PriSetup {
  Scene scene;    // previous-PRI truth (assumed perfectly known)
  Scene scene_d;  // drifted truth with fresh gains
  CMatrix x_r;    // precoded radar/DL block
  CMatrix x_ul;   // precoded uplink block
  CMatrix d_bb;   // transmitted baseband streams (prefix + data)
  CMatrix sync;   // known prefix
  CMatrix f_ue;
  AnalogCombiner comb;
  NoiseConfig noise;
  FramePlan plan;
  double delta_max_deg = 1.0;
};

PriSetup make_pri(const ExperimentConfig& cfg, const FramePlan& plan, double delta_max,
                  double sigma2, std::uint32_t tag, int trial) {
  Rng rng = make_rng(cfg.seed, {tag, static_cast<std::uint32_t>(trial)});
  PriSetup s;
  s.plan = plan;
  s.delta_max_deg = delta_max;
  s.scene = generate_scene(cfg.k_targets, cfg.l_paths, cfg.grid_slices, rng);

  const CsiPieces csi = perfect_csi(s.scene, cfg.arrays);
  const ZfPair zf = zf_pair(csi.h_tilde, csi.b);
  const HybridBeamformer hbf = design_hybrid(csi.theta_all, zf.f_bs, AuxMode::zero, cfg.power,
                                             cfg.arrays.n_tx, cfg.arrays.spacing_over_wavelength);
  const CMatrix s_dl = cn_matrix(cfg.k_targets, plan.t_radar, 1.0, rng);
  s.x_r = hbf.composite() * s_dl;

  s.f_ue = ue_zf_precoder(s.scene.ue_aoas_deg, cfg.arrays.n_rx,
                          cfg.arrays.spacing_over_wavelength);
  s.sync = sync_prefix(cfg.l_paths, cfg.sync_slots);
  s.d_bb = CMatrix(cfg.l_paths, plan.t_ul);
  const int n_sync = std::min(cfg.sync_slots, plan.t_ul);
  s.d_bb.leftCols(n_sync) = s.sync.leftCols(n_sync);
  if (plan.t_ul > n_sync)
    s.d_bb.rightCols(plan.t_ul - n_sync) =
        cn_matrix(cfg.l_paths, plan.t_ul - n_sync, 1.0, rng);
  s.x_ul = s.f_ue * s.d_bb;

  // unit drift scaled by delta_max so sweeps over delta_max stay paired
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DriftModel drift;
  drift.delta_max_deg = delta_max;
  drift.target_drift_deg.resize(static_cast<std::size_t>(cfg.k_targets));
  for (auto& d : drift.target_drift_deg) d = delta_max * u(rng);
  drift.ue_drift_deg.resize(static_cast<std::size_t>(cfg.l_paths));
  for (auto& d : drift.ue_drift_deg) d = delta_max * u(rng);
  s.scene_d = apply_drift(s.scene, drift, rng);

  s.comb = tracking_combiner(s.scene.target_angles_deg, cfg.arrays.n_rf, cfg.arrays.n_tx,
                             cfg.arrays.spacing_over_wavelength, rng);
  s.noise = NoiseConfig{sigma2, sigma2, sigma2,
                        mix64(cfg.seed, (static_cast<std::uint64_t>(tag) << 32) |
                                            static_cast<std::uint64_t>(trial))};
  return s;
}

struct PriOutcome {
  TrackResult bs_track;
  TrackResult ue_track;
  SicResult sic;
  UlSeReport se_sic;
  UlSeReport se_nosic;
  double bs_rms = 0.0;
  double ue_rms = kNan;
};

PriOutcome run_pri(const PriSetup& s, const ExperimentConfig& cfg, bool want_nosic,
                   bool want_ue) {
  const ArrayConfig& a = cfg.arrays;
  const double sp = a.spacing_over_wavelength;
  const int dt = s.plan.overlap;
  PriOutcome out;

  const CMatrix y0 = assemble_frame(s.scene_d, a, s.x_r, s.x_ul, s.plan, s.noise);
  const CMatrix y0c = s.comb.w_rf * y0;
  out.bs_track = track_angles(y0c, s.comb, s.scene.target_angles_deg, s.delta_max_deg,
                              cfg.track_step_deg, sp);

  SicOptions sic_opt;
  out.sic = sic_decode(y0c, s.x_r, out.bs_track.angles_deg, cfg.l_paths, s.plan, s.comb, s.sync,
                       sp, sic_opt);

  const CMatrix echo_true_ov =
      dt > 0 ? CMatrix(echo_matrix(s.scene_d, a, s.x_r.rightCols(dt))) : CMatrix(a.n_tx, 0);
  CMatrix y_res = echo_true_ov;
  if (dt > 0) {
    const CMatrix a_track = steering_matrix(out.bs_track.angles_deg, a.n_tx, sp);
    CVector alpha(static_cast<Eigen::Index>(out.sic.refl_gains.size()));
    for (std::size_t i = 0; i < out.sic.refl_gains.size(); ++i)
      alpha(static_cast<Eigen::Index>(i)) = out.sic.refl_gains[i];
    y_res -= a_track * alpha.asDiagonal() * (a_track.transpose() * s.x_r.rightCols(dt));
  }

  const CMatrix h_ul = dl_channel(s.scene_d, a).transpose();
  out.se_sic = ul_se(h_ul, s.f_ue, s.comb.w_rf, out.sic.w_bb, y_res, s.plan, cfg.power,
                     s.noise.sigma2_ul);

  if (want_nosic) {
    SicOptions raw_opt;
    raw_opt.subtraction = false;
    const SicResult raw = sic_decode(y0c, s.x_r, out.bs_track.angles_deg, cfg.l_paths, s.plan,
                                     s.comb, s.sync, sp, raw_opt);
    out.se_nosic = ul_se(h_ul, s.f_ue, s.comb.w_rf, raw.w_bb, echo_true_ov, s.plan, cfg.power,
                         s.noise.sigma2_ul);
  }

  std::vector<double> errs(static_cast<std::size_t>(cfg.k_targets));
  for (std::size_t k = 0; k < errs.size(); ++k)
    errs[k] = std::abs(out.bs_track.angles_deg[k] - s.scene_d.target_angles_deg[k]);
  out.bs_rms = rms(errs);

  if (want_ue) {
    const CMatrix y_dl = dl_received(s.scene_d, a, s.x_r, s.noise);
    out.ue_track =
        ue_track_angles(y_dl, s.scene.ue_aoas_deg, s.delta_max_deg, cfg.track_step_deg, sp);
    std::vector<double> ue_errs(static_cast<std::size_t>(cfg.l_paths));
    for (std::size_t l = 0; l < ue_errs.size(); ++l)
      ue_errs[l] = std::abs(out.ue_track.angles_deg[l] - s.scene_d.ue_aoas_deg[l]);
    out.ue_rms = rms(ue_errs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// per-figure experiments

std::vector<int> match_indices(const std::vector<double>& est, const std::vector<double>& truth) {
  struct Pair {
    double err;
    std::size_t e, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t)
    for (std::size_t e = 0; e < est.size(); ++e)
      pairs.push_back({std::abs(est[e] - truth[t]), e, t});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.err != y.err) return x.err < y.err;
    if (x.t != y.t) return x.t < y.t;
    return x.e < y.e;
  });
  std::vector<int> match(truth.size(), -1);
  std::vector<bool> e_used(est.size(), false), t_used(truth.size(), false);
  for (const Pair& p : pairs) {
    if (e_used[p.e] || t_used[p.t]) continue;
    e_used[p.e] = t_used[p.t] = true;
    match[p.t] = static_cast<int>(p.e);
  }
  return match;
}

void write_estimates_csv(const ExperimentConfig& cfg, const Scene& scene,
                         const Stage1Report& rep, const std::string& name,
                         std::vector<std::string>* files) {
  std::ofstream os = open_out(cfg, name, files);
  os << "side,index,true_angle_deg,est_angle_deg,err_deg,true_gain_re,true_gain_im,"
        "est_gain_re,est_gain_im\n";
  auto row = [&os](const char* side, std::size_t i, double ta, double ea, cd tg, cd eg,
                   bool with_gain) {
    os << side << "," << i << "," << ta << ",";
    if (std::isnan(ea))
      os << "nan,nan";
    else
      os << ea << "," << std::abs(ea - ta);
    if (with_gain)
      os << "," << tg.real() << "," << tg.imag() << "," << eg.real() << "," << eg.imag();
    else
      os << ",nan,nan,nan,nan";
    os << "\n";
  };
  const auto bs_match = match_indices(rep.bs_angles_deg, scene.target_angles_deg);
  for (std::size_t k = 0; k < scene.target_angles_deg.size(); ++k) {
    const int m = bs_match[k];
    row("bs", k, scene.target_angles_deg[k],
        m >= 0 ? rep.bs_angles_deg[static_cast<std::size_t>(m)] : kNan, scene.target_gains[k],
        m >= 0 ? rep.bs_gains[static_cast<std::size_t>(m)] : cd{}, true);
  }
  const auto ue_match = match_indices(rep.ue_angles_deg, scene.ue_aoas_deg);
  for (std::size_t l = 0; l < scene.ue_aoas_deg.size(); ++l) {
    const int m = ue_match[l];
    row("ue", l, scene.ue_aoas_deg[l],
        m >= 0 ? rep.ue_angles_deg[static_cast<std::size_t>(m)] : kNan, cd{}, cd{}, false);
  }
  // comm paths matched on the UE arrival angle that drove each pilot column
  const auto comm_match = match_indices(rep.ue_angles_deg, scene.ue_aoas_deg);
  for (std::size_t l = 0; l < scene.ue_aoas_deg.size(); ++l) {
    const int m = comm_match[l];
    row("comm", l, scene.comm_aod_deg()[l],
        m >= 0 && m < static_cast<int>(rep.comm_path_angles_deg.size())
            ? rep.comm_path_angles_deg[static_cast<std::size_t>(m)]
            : kNan,
        scene.comm_gains[l],
        m >= 0 && m < static_cast<int>(rep.comm_gains.size())
            ? rep.comm_gains[static_cast<std::size_t>(m)]
            : cd{},
        true);
  }
}

Scene search_scene(ExperimentId id, Rng& rng) {
  return id == ExperimentId::fig4 ? case1_scene(rng) : case2_scene(rng);
}

ExperimentResult run_search_figure(const ExperimentConfig& cfg) {
  const std::string prefix = to_string(cfg.experiment_id);
  const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db.at(0), cfg.power);
  const std::uint32_t tag = fig_tag(cfg.experiment_id);

  struct Trial {
    Scene scene;
    Stage1Report rep;
    bool recovered;
  };
  auto body = [&](int trial) {
    Rng rng = make_rng(cfg.seed, {tag, static_cast<std::uint32_t>(trial)});
    Trial t{search_scene(cfg.experiment_id, rng), {}, false};
    t.rep = stage1_at(cfg, t.scene, sigma2, cfg.t_pilot,
                      mix64(cfg.seed, (static_cast<std::uint64_t>(tag) << 32) |
                                          static_cast<std::uint64_t>(trial)),
                      rng);
    const auto errs = match_errors_deg(t.rep.bs_angles_deg, t.scene.target_angles_deg);
    t.recovered =
        std::all_of(errs.begin(), errs.end(), [](double e) { return e <= 1.0 + 1e-9; });
    return t;
  };
  const auto outcomes = run_trials<Trial>(cfg.trials, body);

  SeriesBuilder sb("recovery_fraction", "snr_db", {cfg.snr_grid_db.at(0)}, {"bs_all_within_1deg"});
  for (const auto& t : outcomes)
    if (t) sb.add("bs_all_within_1deg", 0, t->recovered ? 1.0 : 0.0);

  ExperimentResult res;
  res.series.push_back(sb.finish());
  if (outcomes.at(0)) {
    const Trial& t0 = *outcomes.at(0);
    save_spectrum_csv(t0.rep.bs_spectrum,
                      (std::filesystem::path(cfg.out_dir) / (prefix + "_bs_spectrum.csv")).string());
    res.files_written.push_back(
        (std::filesystem::path(cfg.out_dir) / (prefix + "_bs_spectrum.csv")).string());
    save_spectrum_csv(t0.rep.ue_spectrum,
                      (std::filesystem::path(cfg.out_dir) / (prefix + "_ue_spectrum.csv")).string());
    res.files_written.push_back(
        (std::filesystem::path(cfg.out_dir) / (prefix + "_ue_spectrum.csv")).string());
    write_estimates_csv(cfg, t0.scene, t0.rep, prefix + "_estimates.csv", &res.files_written);
    const std::string report_path =
        (std::filesystem::path(cfg.out_dir) / (prefix + "_stage1_report.txt")).string();
    t0.rep.save_text(report_path);
    res.files_written.push_back(report_path);
  }
  write_series_csv(res.series[0], cfg, prefix + "_summary.csv", &res.files_written);
  return res;
}

ExperimentResult run_fig6(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  const std::vector<std::string> variants{"radar", "comm"};
  SeriesBuilder vs_snr("nmse_db", "snr_db", cfg.snr_grid_db, variants);
  std::vector<double> t_values(cfg.pilot_length_grid.begin(), cfg.pilot_length_grid.end());
  SeriesBuilder vs_t("nmse_db", "pilot_slots", t_values, variants);

  struct Sample {
    double radar, comm;
  };
  auto eval = [&](int trial, double sigma2, int t_pilot) {
    Rng rng = make_rng(cfg.seed, {tag, static_cast<std::uint32_t>(trial)});
    const Scene scene = generate_scene(cfg.k_targets, cfg.l_paths, cfg.grid_slices, rng);
    const Stage1Report rep =
        stage1_at(cfg, scene, sigma2, t_pilot,
                  mix64(cfg.seed, (static_cast<std::uint64_t>(tag) << 32) |
                                      static_cast<std::uint64_t>(trial)),
                  rng);
    Sample s;
    s.radar = nmse_db(radar_estimate(rep, cfg.arrays),
                      radar_channel_matrix(scene.target_angles_deg, scene.target_gains,
                                           cfg.arrays.n_tx, cfg.arrays.spacing_over_wavelength));
    s.comm = nmse_db(comm_estimate(rep, cfg.arrays), dl_channel(scene, cfg.arrays));
    return s;
  };

  for (std::size_t xi = 0; xi < cfg.snr_grid_db.size(); ++xi) {
    const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db[xi], cfg.power);
    const auto outcomes = run_trials<Sample>(
        cfg.trials, [&](int trial) { return eval(trial, sigma2, cfg.t_pilot); });
    for (const auto& s : outcomes)
      if (s) {
        vs_snr.add("radar", xi, s->radar);
        vs_snr.add("comm", xi, s->comm);
      }
  }
  const double sigma2_fixed = snr_db_to_sigma2(10.0, cfg.power);
  for (std::size_t xi = 0; xi < cfg.pilot_length_grid.size(); ++xi) {
    const int t_pilot = cfg.pilot_length_grid[xi];
    const auto outcomes = run_trials<Sample>(
        cfg.trials, [&](int trial) { return eval(trial, sigma2_fixed, t_pilot); });
    for (const auto& s : outcomes)
      if (s) {
        vs_t.add("radar", xi, s->radar);
        vs_t.add("comm", xi, s->comm);
      }
  }

  ExperimentResult res;
  res.series.push_back(vs_snr.finish());
  res.series.push_back(vs_t.finish());
  write_series_csv(res.series[0], cfg, "fig6_snr.csv", &res.files_written);
  write_series_csv(res.series[1], cfg, "fig6_pilot_length.csv", &res.files_written);
  maybe_write_gnuplot(cfg, "fig6_snr.csv", res.series[0], &res.files_written);
  return res;
}

std::vector<std::string> csi_variant_names(const std::vector<Variant>& vs) {
  std::vector<std::string> names;
  for (Variant v : vs) names.push_back(to_string(v) + "_perfect");
  for (Variant v : vs) names.push_back(to_string(v) + "_est");
  return names;
}

ExperimentResult run_fig7(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  SeriesBuilder sb("se_bits_hz", "snr_db", cfg.snr_grid_db, csi_variant_names(cfg.variant_set));

  struct Sample {
    std::vector<double> values;  // perfect..., est...; all NaN when the trial degenerates
  };
  for (std::size_t xi = 0; xi < cfg.snr_grid_db.size(); ++xi) {
    const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db[xi], cfg.power);
    auto body = [&](int trial) {
      Rng rng = make_rng(cfg.seed, {tag, static_cast<std::uint32_t>(trial)});
      const Scene scene = generate_scene(cfg.k_targets, cfg.l_paths, cfg.grid_slices, rng);
      const CMatrix h_true = dl_channel(scene, cfg.arrays);
      Sample s;
      // a failed estimation drops the whole trial so the perfect- and
      // estimated-CSI curves always average the same scene population
      try {
        const Stage1Report rep =
            stage1_at(cfg, scene, sigma2, cfg.t_pilot,
                      mix64(cfg.seed, (static_cast<std::uint64_t>(tag) << 32) |
                                          static_cast<std::uint64_t>(trial)),
                      rng);
        const CsiPieces est = estimated_csi(rep, cfg.arrays, cfg.l_paths);
        const VariantSe perfect =
            all_variant_se(perfect_csi(scene, cfg.arrays), h_true, cfg.arrays, cfg.power,
                           cfg.power, sigma2);
        const VariantSe estimated =
            all_variant_se(est, h_true, cfg.arrays, cfg.power, cfg.power, sigma2);
        for (Variant v : cfg.variant_set) s.values.push_back(perfect.value(v));
        for (Variant v : cfg.variant_set) s.values.push_back(estimated.value(v));
      } catch (const std::exception&) {
        s.values.assign(2 * cfg.variant_set.size(), kNan);
      }
      return s;
    };
    const auto outcomes = run_trials<Sample>(cfg.trials, body);
    const auto names = csi_variant_names(cfg.variant_set);
    for (const auto& s : outcomes)
      if (s)
        for (std::size_t i = 0; i < names.size(); ++i) sb.add(names[i], xi, s->values[i]);
  }

  ExperimentResult res;
  res.series.push_back(sb.finish());
  write_series_csv(res.series[0], cfg, "fig7.csv", &res.files_written);
  maybe_write_gnuplot(cfg, "fig7.csv", res.series[0], &res.files_written);
  return res;
}

ExperimentResult run_fig8(const ExperimentConfig& cfg) {
  Rng rng = make_rng(cfg.seed, {fig_tag(cfg.experiment_id), 0u});
  const Scene scene = beampattern_scene(rng);
  const CsiPieces csi = perfect_csi(scene, cfg.arrays);
  const ZfPair zf = zf_pair(csi.h_tilde, csi.b);
  const HybridBeamformer hbf = design_hybrid(csi.theta_all, zf.f_bs, AuxMode::zero, cfg.power,
                                             cfg.arrays.n_tx, cfg.arrays.spacing_over_wavelength);
  const AngleGrid grid{-90.0, 90.0, 0.1};
  const std::vector<double> angles = grid.points();
  const std::vector<double> d_dfrc =
      beampattern(hbf.f_rf, cfg.power, angles, cfg.arrays.spacing_over_wavelength);
  const double p_comm = (hbf.f_rf * hbf.f_bb.leftCols(cfg.l_paths)).squaredNorm();
  const CMatrix f_zf = fd_zf_precoder(zf.f_bs, p_comm, cfg.l_paths);
  const std::vector<double> d_zf =
      transmit_pattern(f_zf, angles, cfg.arrays.spacing_over_wavelength);

  ExperimentResult res;
  auto dump = [&](const std::string& name, const std::vector<double>& d) {
    std::ofstream os = open_out(cfg, name, &res.files_written);
    os << "angle_deg,d_linear,d_db\n";
    for (std::size_t i = 0; i < angles.size(); ++i)
      os << angles[i] << "," << d[i] << "," << 10.0 * std::log10(std::max(d[i], 1e-300)) << "\n";
  };
  dump("fig8_dfrc.csv", d_dfrc);
  dump("fig8_zf.csv", d_zf);

  MetricSeries s;
  s.metric_name = "beampattern_db";
  s.x_name = "angle_deg";
  s.x_values = angles;
  s.variants = {"dfrc", "zf_only"};
  auto to_db = [](const std::vector<double>& lin) {
    std::vector<double> db(lin.size());
    for (std::size_t i = 0; i < lin.size(); ++i) db[i] = 10.0 * std::log10(std::max(lin[i], 1e-300));
    return db;
  };
  s.mean["dfrc"] = to_db(d_dfrc);
  s.mean["zf_only"] = to_db(d_zf);
  s.se["dfrc"].assign(angles.size(), 0.0);
  s.se["zf_only"].assign(angles.size(), 0.0);
  s.n_ok["dfrc"].assign(angles.size(), 1);
  s.n_ok["zf_only"].assign(angles.size(), 1);
  res.series.push_back(std::move(s));

  // target list embedded for downstream checks
  std::ofstream os = open_out(cfg, "fig8_scene.txt", &res.files_written);
  os << "target_angles_deg:";
  for (double a : scene.target_angles_deg) os << " " << a;
  os << "\ncomm_path_count: " << scene.comm_path_count << "\n";
  return res;
}

ExperimentResult run_fig9(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db.at(0), cfg.power);
  std::vector<double> xs(cfg.k_grid.begin(), cfg.k_grid.end());
  SeriesBuilder sb("se_bits_hz", "k_targets", xs, csi_variant_names(cfg.variant_set));
  const int k_max = *std::max_element(cfg.k_grid.begin(), cfg.k_grid.end());

  struct Sample {
    std::vector<std::vector<double>> per_k;  // [k index][variant index]
  };
  auto body = [&](int trial) {
    Rng rng = make_rng(cfg.seed, {tag, static_cast<std::uint32_t>(trial)});
    const Scene base = generate_scene(k_max, cfg.l_paths, cfg.grid_slices, rng);
    Sample s;
    for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki) {
      const int k = cfg.k_grid[ki];
      Scene scene = base;
      scene.target_angles_deg.resize(static_cast<std::size_t>(k));
      scene.target_gains.resize(static_cast<std::size_t>(k));
      const CMatrix h_true = dl_channel(scene, cfg.arrays);
      std::vector<double> vals;
      try {
        Rng s1_rng = make_rng(cfg.seed, {tag, static_cast<std::uint32_t>(trial),
                                         static_cast<std::uint32_t>(k)});
        ExperimentConfig kcfg = cfg;
        kcfg.k_targets = k;
        const Stage1Report rep =
            stage1_at(kcfg, scene, sigma2, cfg.t_pilot,
                      mix64(cfg.seed, (static_cast<std::uint64_t>(tag) << 32) |
                                          static_cast<std::uint64_t>(trial * 100 + k)),
                      s1_rng);
        const CsiPieces est = estimated_csi(rep, cfg.arrays, cfg.l_paths);
        const VariantSe perfect =
            all_variant_se(perfect_csi(scene, cfg.arrays), h_true, cfg.arrays, cfg.power,
                           cfg.power, sigma2);
        const VariantSe estimated =
            all_variant_se(est, h_true, cfg.arrays, cfg.power, cfg.power, sigma2);
        for (Variant v : cfg.variant_set) vals.push_back(perfect.value(v));
        for (Variant v : cfg.variant_set) vals.push_back(estimated.value(v));
      } catch (const std::exception&) {
        vals.assign(2 * cfg.variant_set.size(), kNan);
      }
      s.per_k.push_back(std::move(vals));
    }
    return s;
  };
  const auto outcomes = run_trials<Sample>(cfg.trials, body);
  const auto names = csi_variant_names(cfg.variant_set);
  for (const auto& s : outcomes)
    if (s)
      for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki)
        for (std::size_t i = 0; i < names.size(); ++i) sb.add(names[i], ki, s->per_k[ki][i]);

  ExperimentResult res;
  res.series.push_back(sb.finish());
  write_series_csv(res.series[0], cfg, "fig9.csv", &res.files_written);
  maybe_write_gnuplot(cfg, "fig9.csv", res.series[0], &res.files_written);
  return res;
}

ExperimentResult run_fig10(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  SeriesBuilder sb("se_bits_hz", "snr_db", cfg.snr_grid_db, {"sic", "no_sic"});
  struct Sample {
    double sic, nosic;
  };
  for (std::size_t xi = 0; xi < cfg.snr_grid_db.size(); ++xi) {
    const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db[xi], cfg.power);
    const auto outcomes = run_trials<Sample>(cfg.trials, [&](int trial) {
      const PriSetup s = make_pri(cfg, cfg.frame, cfg.delta_max_deg, sigma2, tag, trial);
      const PriOutcome o = run_pri(s, cfg, true, false);
      return Sample{o.se_sic.r_ul, o.se_nosic.r_ul};
    });
    for (const auto& s : outcomes)
      if (s) {
        sb.add("sic", xi, s->sic);
        sb.add("no_sic", xi, s->nosic);
      }
  }
  ExperimentResult res;
  res.series.push_back(sb.finish());
  write_series_csv(res.series[0], cfg, "fig10.csv", &res.files_written);
  maybe_write_gnuplot(cfg, "fig10.csv", res.series[0], &res.files_written);
  return res;
}

ExperimentResult run_fig11(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db.at(0), cfg.power);
  std::vector<double> ratios;
  for (int ov : cfg.overlap_grid)
    ratios.push_back(100.0 * static_cast<double>(ov) / static_cast<double>(cfg.frame.t_radar));
  SeriesBuilder sb("se_bits_hz", "overlap_ratio_pct", ratios, {"sic", "no_sic"});
  struct Sample {
    double sic, nosic;
  };
  for (std::size_t xi = 0; xi < cfg.overlap_grid.size(); ++xi) {
    FramePlan plan = cfg.frame;
    plan.overlap = cfg.overlap_grid[xi];
    const auto outcomes = run_trials<Sample>(cfg.trials, [&](int trial) {
      const PriSetup s = make_pri(cfg, plan, cfg.delta_max_deg, sigma2, tag, trial);
      const PriOutcome o = run_pri(s, cfg, true, false);
      return Sample{o.se_sic.r_ul, o.se_nosic.r_ul};
    });
    for (const auto& s : outcomes)
      if (s) {
        sb.add("sic", xi, s->sic);
        sb.add("no_sic", xi, s->nosic);
      }
  }
  ExperimentResult res;
  res.series.push_back(sb.finish());
  write_series_csv(res.series[0], cfg, "fig11.csv", &res.files_written);
  maybe_write_gnuplot(cfg, "fig11.csv", res.series[0], &res.files_written);
  return res;
}

ExperimentResult run_fig12(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db.at(0), cfg.power);
  struct Trial {
    PriSetup setup;
    PriOutcome out;
  };
  const auto outcomes = run_trials<Trial>(cfg.trials, [&](int trial) {
    Trial t{make_pri(cfg, cfg.frame, cfg.delta_max_deg, sigma2, tag, trial), {}};
    t.out = run_pri(t.setup, cfg, false, true);
    return t;
  });

  SeriesBuilder sb("rmse_deg", "snr_db", {cfg.snr_grid_db.at(0)}, {"bs", "ue"});
  for (const auto& t : outcomes)
    if (t) {
      sb.add("bs", 0, t->out.bs_rms);
      sb.add("ue", 0, t->out.ue_rms);
    }

  ExperimentResult res;
  res.series.push_back(sb.finish());
  {
    std::ofstream os = open_out(cfg, "fig12_bs.csv", &res.files_written);
    os << "pri_index,target_index,true_angle,tracked_angle,err_deg,r1,r2,r_ul,residual_norm\n";
    for (std::size_t trial = 0; trial < outcomes.size(); ++trial) {
      if (!outcomes[trial]) continue;
      const Trial& t = *outcomes[trial];
      for (int k = 0; k < cfg.k_targets; ++k) {
        const double truth = t.setup.scene_d.target_angles_deg[static_cast<std::size_t>(k)];
        const double tracked = t.out.bs_track.angles_deg[static_cast<std::size_t>(k)];
        os << trial << "," << k << "," << truth << "," << tracked << ","
           << std::abs(tracked - truth) << "," << t.out.se_sic.r1 << "," << t.out.se_sic.r2
           << "," << t.out.se_sic.r_ul << "," << t.out.se_sic.residual_norm << "\n";
      }
    }
  }
  {
    std::ofstream os = open_out(cfg, "fig12_ue.csv", &res.files_written);
    os << "pri_index,path_index,true_angle,tracked_angle,err_deg\n";
    for (std::size_t trial = 0; trial < outcomes.size(); ++trial) {
      if (!outcomes[trial]) continue;
      const Trial& t = *outcomes[trial];
      for (int l = 0; l < cfg.l_paths; ++l) {
        const double truth = t.setup.scene_d.ue_aoas_deg[static_cast<std::size_t>(l)];
        const double tracked = t.out.ue_track.angles_deg[static_cast<std::size_t>(l)];
        os << trial << "," << l << "," << truth << "," << tracked << ","
           << std::abs(tracked - truth) << "\n";
      }
    }
  }
  write_series_csv(res.series[0], cfg, "fig12_summary.csv", &res.files_written);
  return res;
}

ExperimentResult run_fig13(const ExperimentConfig& cfg) {
  const std::uint32_t tag = fig_tag(cfg.experiment_id);
  std::vector<std::string> variants;
  for (double d : cfg.delta_max_grid_deg) {
    std::ostringstream bs, ue;
    bs << "bs_dmax_" << d;
    ue << "ue_dmax_" << d;
    variants.push_back(bs.str());
    variants.push_back(ue.str());
  }
  SeriesBuilder sb("rmse_deg", "snr_db", cfg.snr_grid_db, variants);
  struct Sample {
    double bs, ue;
  };
  for (std::size_t di = 0; di < cfg.delta_max_grid_deg.size(); ++di) {
    const double dmax = cfg.delta_max_grid_deg[di];
    for (std::size_t xi = 0; xi < cfg.snr_grid_db.size(); ++xi) {
      const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db[xi], cfg.power);
      const auto outcomes = run_trials<Sample>(cfg.trials, [&](int trial) {
        const PriSetup s = make_pri(cfg, cfg.frame, dmax, sigma2, tag, trial);
        const PriOutcome o = run_pri(s, cfg, false, true);
        return Sample{o.bs_rms, o.ue_rms};
      });
      for (const auto& s : outcomes)
        if (s) {
          sb.add(variants[2 * di], xi, s->bs);
          sb.add(variants[2 * di + 1], xi, s->ue);
        }
    }
  }
  ExperimentResult res;
  res.series.push_back(sb.finish());
  write_series_csv(res.series[0], cfg, "fig13.csv", &res.files_written);
  maybe_write_gnuplot(cfg, "fig13.csv", res.series[0], &res.files_written);
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Variant v) {
  switch (v) {
    case Variant::fd_zf: return "fd_zf";
    case Variant::hbf_opt: return "hbf_opt";
    case Variant::hbf_null: return "hbf_null";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "fd_zf") return Variant::fd_zf;
  if (name == "hbf_opt") return Variant::hbf_opt;
  if (name == "hbf_null") return Variant::hbf_null;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::fig4: return "fig4";
    case ExperimentId::fig5: return "fig5";
    case ExperimentId::fig6: return "fig6";
    case ExperimentId::fig7: return "fig7";
    case ExperimentId::fig8: return "fig8";
    case ExperimentId::fig9: return "fig9";
    case ExperimentId::fig10: return "fig10";
    case ExperimentId::fig11: return "fig11";
    case ExperimentId::fig12: return "fig12";
    case ExperimentId::fig13: return "fig13";
    case ExperimentId::pipeline: return "pipeline";
  }
  return "unknown";
}

ExperimentId experiment_from_string(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(ExperimentId::pipeline); ++i)
    if (to_string(static_cast<ExperimentId>(i)) == name) return static_cast<ExperimentId>(i);
  throw std::invalid_argument("unknown experiment id '" + name + "'");
}

Scene presentation_scene(ExperimentId id, std::uint64_t seed) {
  Rng rng = make_rng(seed, {fig_tag(id), 0u});
  switch (id) {
    case ExperimentId::fig4:
    case ExperimentId::fig5:
      return search_scene(id, rng);
    case ExperimentId::fig8:
      return beampattern_scene(rng);
    default:
      throw std::invalid_argument("presentation_scene: not a single-realization figure");
  }
}

void ExperimentConfig::validate() const {
  arrays.validate();
  if (k_targets < 1 || l_paths < 1 || l_paths > k_targets)
    throw std::invalid_argument("config: need 1 <= l_paths <= k_targets");
  if (l_paths > arrays.n_rx) throw std::invalid_argument("config: more paths than UE antennas");
  if (k_targets >= arrays.n_rf)
    throw std::invalid_argument("config: k_targets must stay below n_rf");
  if (grid_slices < k_targets) throw std::invalid_argument("config: grid too coarse for K");
  if (t_pilot < arrays.n_tx) throw std::invalid_argument("config: t_pilot must be >= n_tx");
  if (power <= 0.0) throw std::invalid_argument("config: power must be positive");
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (snr_grid_db.empty()) throw std::invalid_argument("config: snr grid empty");
  if (variant_set.empty()) throw std::invalid_argument("config: variant set empty");
  frame.validate();
}

ExperimentConfig default_config(ExperimentId id) {
  ExperimentConfig cfg;
  cfg.experiment_id = id;
  cfg.snr_grid_db = {10.0};
  switch (id) {
    case ExperimentId::fig4:
      cfg.trials = 1;
      break;
    case ExperimentId::fig5:
      cfg.trials = 1;
      cfg.snr_grid_db = {0.0};
      break;
    case ExperimentId::fig6:
      cfg.snr_grid_db = {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
      cfg.pilot_length_grid = {25, 50, 75, 100, 150, 200};
      break;
    case ExperimentId::fig7:
      cfg.snr_grid_db = {0.0, 5.0, 10.0, 15.0, 20.0};
      break;
    case ExperimentId::fig8:
      cfg.trials = 1;
      break;
    case ExperimentId::fig9:
      cfg.snr_grid_db = {20.0};
      cfg.k_grid = {8, 9, 10, 11, 12, 13, 14, 15};
      break;
    case ExperimentId::fig10:
      cfg.snr_grid_db = {0.0, 5.0, 10.0, 15.0, 20.0};
      break;
    case ExperimentId::fig11:
      cfg.snr_grid_db = {20.0};
      cfg.overlap_grid = {14, 28, 42, 56, 70, 84, 98, 112, 126};
      break;
    case ExperimentId::fig12:
      cfg.trials = 1;
      cfg.snr_grid_db = {-20.0};
      break;
    case ExperimentId::fig13:
      cfg.snr_grid_db = {-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0};
      cfg.delta_max_grid_deg = {1.0, 2.0};
      break;
    case ExperimentId::pipeline:
      cfg.trials = 1;
      break;
  }
  return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  switch (cfg.experiment_id) {
    case ExperimentId::fig4:
    case ExperimentId::fig5:
      return run_search_figure(cfg);
    case ExperimentId::fig6:
      return run_fig6(cfg);
    case ExperimentId::fig7:
      return run_fig7(cfg);
    case ExperimentId::fig8:
      return run_fig8(cfg);
    case ExperimentId::fig9:
      return run_fig9(cfg);
    case ExperimentId::fig10:
      return run_fig10(cfg);
    case ExperimentId::fig11:
      return run_fig11(cfg);
    case ExperimentId::fig12:
      return run_fig12(cfg);
    case ExperimentId::fig13:
      return run_fig13(cfg);
    case ExperimentId::pipeline:
      throw std::invalid_argument("run_experiment: use run_pipeline for the pipeline id");
  }
  throw std::invalid_argument("run_experiment: unknown experiment id");
}

int run_pipeline(const ExperimentConfig& cfg, std::ostream& os) {
  cfg.validate();
  const double sigma2 = snr_db_to_sigma2(cfg.snr_grid_db.at(0), cfg.power);
  const std::uint32_t tag = fig_tag(ExperimentId::pipeline);
  Rng rng = make_rng(cfg.seed, {tag, 0u});
  const Scene scene = generate_scene(cfg.k_targets, cfg.l_paths, cfg.grid_slices, rng);
  os << std::setprecision(6);

  os << "=== stage 1: target search + channel estimation (snr " << cfg.snr_grid_db[0]
     << " dB) ===\n";
  const Stage1Report rep = stage1_at(cfg, scene, sigma2, cfg.t_pilot, mix64(cfg.seed, tag), rng);
  os << "true target angles:";
  for (double a : scene.target_angles_deg) os << " " << a;
  os << "\nestimated angles:  ";
  for (double a : rep.bs_angles_deg) os << " " << a;
  os << "\nue true aoas:";
  for (double a : scene.ue_aoas_deg) os << " " << a;
  os << "\nue estimated:";
  for (double a : rep.ue_angles_deg) os << " " << a;
  os << "\nidentified comm aods:";
  for (double a : rep.comm_path_angles_deg) os << " " << a;
  os << "\nradar-channel nmse: "
     << nmse_db(radar_estimate(rep, cfg.arrays),
                radar_channel_matrix(scene.target_angles_deg, scene.target_gains, cfg.arrays.n_tx,
                                     cfg.arrays.spacing_over_wavelength))
     << " dB\ncomm-channel nmse:  "
     << nmse_db(comm_estimate(rep, cfg.arrays), dl_channel(scene, cfg.arrays)) << " dB\n";

  os << "\n=== stage 2: joint transmit beamforming ===\n";
  const CMatrix h_true = dl_channel(scene, cfg.arrays);
  const VariantSe perfect =
      all_variant_se(perfect_csi(scene, cfg.arrays), h_true, cfg.arrays, cfg.power, cfg.power,
                     sigma2);
  for (Variant v : cfg.variant_set)
    os << to_string(v) << " dl se (perfect csi):   " << perfect.value(v) << " bits/s/Hz\n";
  try {
    const VariantSe estimated = all_variant_se(estimated_csi(rep, cfg.arrays, cfg.l_paths),
                                               h_true, cfg.arrays, cfg.power, cfg.power, sigma2);
    for (Variant v : cfg.variant_set)
      os << to_string(v) << " dl se (estimated csi): " << estimated.value(v) << " bits/s/Hz\n";
  } catch (const std::exception& e) {
    os << "estimated-csi beamforming skipped: " << e.what() << "\n";
  }

  os << "\n=== stage 3: tracking + sic uplink (one pri, overlap " << cfg.frame.overlap
     << " slots) ===\n";
  const PriSetup pri = make_pri(cfg, cfg.frame, cfg.delta_max_deg, sigma2, tag, 1);
  const PriOutcome out = run_pri(pri, cfg, true, true);
  os << "tracked angle rmse (bs): " << out.bs_rms << " deg\n";
  os << "tracked angle rmse (ue): " << out.ue_rms << " deg\n";
  os << "ul se with sic:    " << out.se_sic.r_ul << " bits/s/Hz (r1 " << out.se_sic.r1 << ", r2 "
     << out.se_sic.r2 << ")\n";
  os << "ul se without sic: " << out.se_nosic.r_ul << " bits/s/Hz\n";
  os << "residual echo norm: " << out.se_sic.residual_norm << "\n";
  return 0;
}

int worker_count(int trials) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DFRC_MAX_WORKERS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return std::max(1, std::min(hw, trials));
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

}  // namespace

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_config: cannot open " + path);
  os << std::setprecision(17);
  os << "experiment_id: " << to_string(cfg.experiment_id) << "\n";
  os << "n_tx: " << cfg.arrays.n_tx << "\n";
  os << "n_rx: " << cfg.arrays.n_rx << "\n";
  os << "n_rf: " << cfg.arrays.n_rf << "\n";
  os << "spacing_over_wavelength: " << cfg.arrays.spacing_over_wavelength << "\n";
  os << "k_targets: " << cfg.k_targets << "\n";
  os << "l_paths: " << cfg.l_paths << "\n";
  os << "grid_slices: " << cfg.grid_slices << "\n";
  os << "t_pilot: " << cfg.t_pilot << "\n";
  os << "power: " << cfg.power << "\n";
  os << "snr_grid_db: " << join(cfg.snr_grid_db) << "\n";
  os << "pilot_length_grid: " << join(cfg.pilot_length_grid) << "\n";
  os << "k_grid: " << join(cfg.k_grid) << "\n";
  os << "t_radar: " << cfg.frame.t_radar << "\n";
  os << "t_ul: " << cfg.frame.t_ul << "\n";
  os << "overlap: " << cfg.frame.overlap << "\n";
  os << "guard: " << cfg.frame.guard << "\n";
  os << "overlap_grid: " << join(cfg.overlap_grid) << "\n";
  os << "delta_max_deg: " << cfg.delta_max_deg << "\n";
  os << "delta_max_grid_deg: " << join(cfg.delta_max_grid_deg) << "\n";
  os << "track_step_deg: " << cfg.track_step_deg << "\n";
  os << "sync_slots: " << cfg.sync_slots << "\n";
  os << "trials: " << cfg.trials << "\n";
  os << "seed: " << cfg.seed << "\n";
  std::vector<std::string> vnames;
  for (Variant v : cfg.variant_set) vnames.push_back(to_string(v));
  os << "variants: " << join(vnames) << "\n";
  os << "out_dir: " << cfg.out_dir << "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("load_config: cannot open " + path);
  ExperimentConfig cfg = default_config(ExperimentId::pipeline);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("load_config: malformed line '" + line + "'");
    const std::string key = line.substr(0, colon);
    std::istringstream rest(line.substr(colon + 1));
    auto doubles = [&rest]() {
      std::vector<double> v;
      double x;
      while (rest >> x) v.push_back(x);
      return v;
    };
    auto ints = [&rest]() {
      std::vector<int> v;
      int x;
      while (rest >> x) v.push_back(x);
      return v;
    };
    if (key == "experiment_id") {
      std::string name;
      rest >> name;
      cfg = default_config(experiment_from_string(name));
    } else if (key == "n_tx")
      rest >> cfg.arrays.n_tx;
    else if (key == "n_rx")
      rest >> cfg.arrays.n_rx;
    else if (key == "n_rf")
      rest >> cfg.arrays.n_rf;
    else if (key == "spacing_over_wavelength")
      rest >> cfg.arrays.spacing_over_wavelength;
    else if (key == "k_targets")
      rest >> cfg.k_targets;
    else if (key == "l_paths")
      rest >> cfg.l_paths;
    else if (key == "grid_slices")
      rest >> cfg.grid_slices;
    else if (key == "t_pilot")
      rest >> cfg.t_pilot;
    else if (key == "power")
      rest >> cfg.power;
    else if (key == "snr_grid_db")
      cfg.snr_grid_db = doubles();
    else if (key == "pilot_length_grid")
      cfg.pilot_length_grid = ints();
    else if (key == "k_grid")
      cfg.k_grid = ints();
    else if (key == "t_radar")
      rest >> cfg.frame.t_radar;
    else if (key == "t_ul")
      rest >> cfg.frame.t_ul;
    else if (key == "overlap")
      rest >> cfg.frame.overlap;
    else if (key == "guard")
      rest >> cfg.frame.guard;
    else if (key == "overlap_grid")
      cfg.overlap_grid = ints();
    else if (key == "delta_max_deg")
      rest >> cfg.delta_max_deg;
    else if (key == "delta_max_grid_deg")
      cfg.delta_max_grid_deg = doubles();
    else if (key == "track_step_deg")
      rest >> cfg.track_step_deg;
    else if (key == "sync_slots")
      rest >> cfg.sync_slots;
    else if (key == "trials")
      rest >> cfg.trials;
    else if (key == "seed")
      rest >> cfg.seed;
    else if (key == "variants") {
      cfg.variant_set.clear();
      std::string name;
      while (rest >> name) cfg.variant_set.push_back(variant_from_string(name));
    } else if (key == "out_dir") {
      rest >> cfg.out_dir;
    } else {
      throw std::invalid_argument("load_config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

}  // namespace dfrc
