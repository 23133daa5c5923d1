#pragma once

// Experiment orchestration: the resolved configuration type, the four
// commands (synth, estimate, run, montecarlo) as library functions, and
// the deterministic multi-worker Monte-Carlo driver. The CLI binary is a
// thin argument-parsing shell over these.

#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "wbfm/common.hpp"
#include "wbfm/estimator.hpp"
#include "wbfm/io.hpp"
#include "wbfm/model.hpp"
#include "wbfm/spectrum.hpp"
#include "wbfm/spectrum_est.hpp"
#include "wbfm/tf.hpp"

namespace wbfm::cli {

// ---------------------------------------------------------------------------
// resolved configuration

struct ExperimentConfig {
  int L = 4096, a = 32, b = 16;
  tf::WindowKind window = tf::WindowKind::gauss;
  double window_width = 128.0;

  std::string spectrum_kind = "multiband";  // multiband | raised_cosine | smoothed_random
  double sp_center = 0.0, sp_width = 0.0;   // 0 -> scale defaults L/6, L/7
  int sp_lines = 12;
  double sp_line_width = 2.0, sp_amp_jitter = 0.35, sp_pos_jitter = 0.25;
  double sp_smooth = 8.0;
  std::uint64_t sp_seed = 12345;  // internal layout stream, independent of run seed

  std::string mod_kind = "none";  // none | constant | chirp | sine
  double mod_k0 = 0.0, mod_rate = 0.0, mod_amp = 0.0, mod_freq = 1.0, mod_phase = 0.0;

  bool have_sigma0 = false;
  double sigma0 = 0.0;
  double snr_db = 20.0;

  est::EstimatorConfig est;
  est::SpectrumMethod spectrum_method = est::SpectrumMethod::welch;
  est::WelchParams welch;

  std::uint64_t seed = 1;
  int num_realizations = 20;
  std::string input_signal;  // empty -> <out>/signal.bin
  std::string input_truth;   // empty -> <out>/gamma_true.csv when present
};

// separate stream for the additive noise so run seeds i and i+1 never share it
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ull; }

inline ExperimentConfig parse_experiment_config(const io::ConfigMap& cm) {
  ExperimentConfig e;
  e.L = static_cast<int>(cm.get_int("L", e.L));
  e.a = static_cast<int>(cm.get_int("a", e.a));
  e.b = static_cast<int>(cm.get_int("b", e.b));

  const std::string w = cm.get_string("window", "gauss");
  if (w == "gauss")
    e.window = tf::WindowKind::gauss;
  else if (w == "hann")
    e.window = tf::WindowKind::hann;
  else if (w == "rect")
    e.window = tf::WindowKind::rect;
  else
    throw config_error("config key 'window': expected gauss|hann|rect, got '" + w + "'");
  e.window_width = cm.get_double("window_width", e.L / 32.0);

  e.spectrum_kind = cm.get_string("spectrum", e.spectrum_kind);
  if (e.spectrum_kind != "multiband" && e.spectrum_kind != "raised_cosine" &&
      e.spectrum_kind != "smoothed_random")
    throw config_error("config key 'spectrum': expected multiband|raised_cosine|smoothed_random");
  e.sp_center = cm.get_double("spectrum_center", e.L / 6.0);
  e.sp_width = cm.get_double("spectrum_width", e.L / 7.0);
  e.sp_lines = static_cast<int>(cm.get_int("spectrum_lines", e.sp_lines));
  e.sp_line_width = cm.get_double("spectrum_line_width", e.sp_line_width);
  e.sp_amp_jitter = cm.get_double("spectrum_amp_jitter", e.sp_amp_jitter);
  e.sp_pos_jitter = cm.get_double("spectrum_pos_jitter", e.sp_pos_jitter);
  e.sp_smooth = cm.get_double("spectrum_smooth", e.sp_smooth);
  e.sp_seed = static_cast<std::uint64_t>(cm.get_int("spectrum_seed", 12345));

  e.mod_kind = cm.get_string("modulation", e.mod_kind);
  if (e.mod_kind != "none" && e.mod_kind != "constant" && e.mod_kind != "chirp" &&
      e.mod_kind != "sine")
    throw config_error("config key 'modulation': expected none|constant|chirp|sine");
  e.mod_k0 = cm.get_double("mod_k0", e.mod_k0);
  e.mod_rate = cm.get_double("mod_rate", e.mod_rate);
  e.mod_amp = cm.get_double("mod_amp", e.mod_amp);
  e.mod_freq = cm.get_double("mod_freq", e.mod_freq);
  e.mod_phase = cm.get_double("mod_phase", e.mod_phase);

  e.have_sigma0 = cm.has("sigma0");
  if (e.have_sigma0) e.sigma0 = cm.get_double("sigma0", 0.0);
  const bool have_snr = cm.has("snr_db");
  if (have_snr) e.snr_db = cm.get_double("snr_db", e.snr_db);
  if (e.have_sigma0 && have_snr)
    throw config_error("config keys 'sigma0' and 'snr_db' are mutually exclusive");

  const std::string mode = cm.get_string("mode", "reference");
  if (mode == "verbatim")
    e.est.mode = est::EstimatorMode::verbatim;
  else if (mode == "reference")
    e.est.mode = est::EstimatorMode::reference;
  else
    throw config_error("config key 'mode': expected verbatim|reference, got '" + mode + "'");
  e.est.eps = cm.get_double("eps", e.est.eps);
  e.est.max_iter = static_cast<int>(cm.get_int("max_iter", e.est.max_iter));
  // mode-dependent default: the reference loop carries a stronger ridge
  e.est.lambda_rel = cm.get_double(
      "lambda_rel", e.est.mode == est::EstimatorMode::reference ? 1e-3 : 1e-6);
  const std::string interp = cm.get_string("interpolation", "cubic");
  if (interp == "cubic")
    e.est.interp = est::InterpKind::cubic;
  else if (interp == "linear")
    e.est.interp = est::InterpKind::linear;
  else
    throw config_error("config key 'interpolation': expected cubic|linear, got '" + interp + "'");
  e.est.search_lo = static_cast<int>(cm.get_int("search_lo", e.est.search_lo));
  e.est.search_hi = static_cast<int>(cm.get_int("search_hi", e.est.search_hi));

  const std::string sm = cm.get_string("spectrum_method", "welch");
  if (sm == "welch")
    e.spectrum_method = est::SpectrumMethod::welch;
  else if (sm == "marginal")
    e.spectrum_method = est::SpectrumMethod::marginal;
  else
    throw config_error("config key 'spectrum_method': expected welch|marginal, got '" + sm + "'");
  e.welch.segment = static_cast<int>(cm.get_int("welch_segment", e.welch.segment));
  e.welch.hop = static_cast<int>(cm.get_int("welch_hop", e.welch.hop));

  e.seed = static_cast<std::uint64_t>(cm.get_int("seed", 1));
  e.num_realizations = static_cast<int>(cm.get_int("num_realizations", e.num_realizations));
  e.input_signal = cm.get_string("input_signal", "");
  e.input_truth = cm.get_string("input_truth", "");

  cm.reject_unknown();

  if (e.L < 8) throw config_error("config key 'L': must be >= 8");
  if (e.a < 1 || e.L % e.a != 0) throw config_error("config key 'a': must divide L");
  if (e.b < 1 || e.L % e.b != 0) throw config_error("config key 'b': must divide L");
  if (e.window_width <= 0) throw config_error("config key 'window_width': must be > 0");
  if (e.num_realizations < 1) throw config_error("config key 'num_realizations': must be >= 1");
  if (e.est.max_iter < 1) throw config_error("config key 'max_iter': must be >= 1");
  if (e.est.eps < 0) throw config_error("config key 'eps': must be >= 0");
  if (e.est.lambda_rel < 0) throw config_error("config key 'lambda_rel': must be >= 0");
  const int hi = e.est.search_hi < 0 ? e.L - 1 : e.est.search_hi;
  if (e.est.search_lo < 0 || hi >= e.L || e.est.search_lo > hi)
    throw config_error("config keys 'search_lo'/'search_hi': need 0 <= lo <= hi < L");
  if (e.have_sigma0 && e.sigma0 < 0) throw config_error("config key 'sigma0': must be >= 0");
  return e;
}

// canonical echo of every resolved field; reparsing it reproduces the config
inline std::string canonical_config(const ExperimentConfig& e) {
  std::string s;
  auto put = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  put("L", std::to_string(e.L));
  put("a", std::to_string(e.a));
  put("b", std::to_string(e.b));
  put("eps", io::g17(e.est.eps));
  put("input_signal", e.input_signal);
  put("input_truth", e.input_truth);
  put("interpolation", e.est.interp == est::InterpKind::cubic ? "cubic" : "linear");
  put("lambda_rel", io::g17(e.est.lambda_rel));
  put("max_iter", std::to_string(e.est.max_iter));
  put("mod_amp", io::g17(e.mod_amp));
  put("mod_freq", io::g17(e.mod_freq));
  put("mod_k0", io::g17(e.mod_k0));
  put("mod_phase", io::g17(e.mod_phase));
  put("mod_rate", io::g17(e.mod_rate));
  put("mode", e.est.mode == est::EstimatorMode::verbatim ? "verbatim" : "reference");
  put("modulation", e.mod_kind);
  put("num_realizations", std::to_string(e.num_realizations));
  put("search_hi", std::to_string(e.est.search_hi));
  put("search_lo", std::to_string(e.est.search_lo));
  put("seed", std::to_string(e.seed));
  if (e.have_sigma0)
    put("sigma0", io::g17(e.sigma0));
  else
    put("snr_db", io::g17(e.snr_db));
  put("spectrum", e.spectrum_kind);
  put("spectrum_amp_jitter", io::g17(e.sp_amp_jitter));
  put("spectrum_center", io::g17(e.sp_center));
  put("spectrum_line_width", io::g17(e.sp_line_width));
  put("spectrum_lines", std::to_string(e.sp_lines));
  put("spectrum_method", e.spectrum_method == est::SpectrumMethod::welch ? "welch" : "marginal");
  put("spectrum_pos_jitter", io::g17(e.sp_pos_jitter));
  put("spectrum_seed", std::to_string(e.sp_seed));
  put("spectrum_smooth", io::g17(e.sp_smooth));
  put("spectrum_width", io::g17(e.sp_width));
  put("welch_hop", std::to_string(e.welch.hop));
  put("welch_segment", std::to_string(e.welch.segment));
  put("window", e.window == tf::WindowKind::gauss   ? "gauss"
                : e.window == tf::WindowKind::hann ? "hann"
                                                   : "rect");
  put("window_width", io::g17(e.window_width));
  return s;
}

// ---------------------------------------------------------------------------
// builders

inline tf::GaborSystem build_system(const ExperimentConfig& e) {
  return tf::make_system(e.L, e.a, e.b, tf::make_window(e.window, e.L, e.window_width));
}

inline model::PowerSpectrum build_spectrum(const ExperimentConfig& e) {
  if (e.sp_center - e.sp_width / 2.0 <= 0.0 || e.sp_center + e.sp_width / 2.0 >= e.L / 2.0)
    throw config_error("config keys 'spectrum_center'/'spectrum_width': band must sit inside (0, L/2)");
  if (e.spectrum_kind == "multiband")
    return model::multiband_spectrum(e.L, e.sp_center, e.sp_width, e.sp_lines, e.sp_line_width,
                                     e.sp_amp_jitter, e.sp_pos_jitter, e.sp_seed);
  if (e.spectrum_kind == "raised_cosine")
    return model::raised_cosine_spectrum(e.L, e.sp_center, e.sp_width);
  return model::smoothed_random_spectrum(e.L, e.sp_center, e.sp_width, e.sp_smooth, e.sp_seed);
}

inline model::ModulationLaw build_modulation(const ExperimentConfig& e) {
  model::ModulationParams p;
  if (e.mod_kind == "none") return model::make_modulation(model::ModulationKind::constant, e.L, p);
  if (e.mod_kind == "constant") {
    p.k0 = e.mod_k0;
    return model::make_modulation(model::ModulationKind::constant, e.L, p);
  }
  if (e.mod_kind == "chirp") {
    p.k0 = e.mod_k0;
    p.rate = e.mod_rate;
    return model::make_modulation(model::ModulationKind::linear_chirp, e.L, p);
  }
  p.k0 = e.mod_k0;
  p.amp = e.mod_amp;
  p.freq = e.mod_freq;
  p.phase = e.mod_phase;
  return model::make_modulation(model::ModulationKind::sine_fm, e.L, p);
}

inline double resolve_sigma0(const ExperimentConfig& e) {
  if (e.have_sigma0) return e.sigma0;
  return model::sigma_from_snr(build_spectrum(e), e.snr_db);
}

// ---------------------------------------------------------------------------
// cmd_synth

inline void cmd_synth(const ExperimentConfig& e, const std::string& out, bool verbose = false) {
  io::ensure_dir(out);
  const model::PowerSpectrum S = build_spectrum(e);
  const model::ModulationLaw law = build_modulation(e);
  const double sigma0 = e.have_sigma0 ? e.sigma0 : model::sigma_from_snr(S, e.snr_db);
  cvec Z = model::synthesize_stationary(S, e.seed);
  const model::ModelSignal sig =
      model::synthesize_observation(std::move(Z), law, sigma0, noise_seed(e.seed),
                                    model::total_power(S));

  io::write_signal(out + "/signal.bin", sig.Y);
  io::write_signal_csv(out + "/signal.csv", sig.Y);
  {
    std::string s = "t,gamma,gamma_prime\n";
    for (int t = 0; t < e.L; ++t)
      s += std::to_string(t) + "," + io::g9(law.gamma[t]) + "," + io::g9(law.gamma_prime[t]) + "\n";
    io::write_bytes_atomic(out + "/gamma_true.csv", s);
  }
  {
    std::string s = "bin,S\n";
    for (size_t k = 0; k < S.values.size(); ++k)
      s += std::to_string(k) + "," + io::g9(S.values[k]) + "\n";
    io::write_bytes_atomic(out + "/spectrum_true.csv", s);
  }
  io::write_bytes_atomic(out + "/config_echo.cfg", canonical_config(e));
  if (verbose)
    std::fprintf(stderr, "synth: L=%d sigma0=%s -> %s\n", e.L, io::g9(sigma0).c_str(),
                 out.c_str());
}

// ---------------------------------------------------------------------------
// cmd_estimate

struct EstimateResult {
  est::IterationLog log;
  bool have_truth = false;
  est::TrackMetrics metrics;
  double hit_fraction = 0.0;
};

inline EstimateResult cmd_estimate(const ExperimentConfig& e, const std::string& out,
                                   bool verbose = false) {
  io::ensure_dir(out);
  const std::string sig_path = e.input_signal.empty() ? out + "/signal.bin" : e.input_signal;
  const cvec Y = io::read_signal(sig_path);
  if (static_cast<int>(Y.size()) != e.L)
    throw config_error("config key 'L' (" + std::to_string(e.L) + ") does not match signal length " +
                       std::to_string(Y.size()) + " in " + sig_path);
  const tf::GaborSystem sys = build_system(e);
  const double sigma0 = resolve_sigma0(e);

  EstimateResult r;
  r.log = est::run_algorithm1(Y, sys, sigma0, e.est);

  {
    std::string s = "iter,criterion\n";
    for (size_t i = 0; i < r.log.criteria.size(); ++i)
      s += std::to_string(i + 1) + "," + io::g9(r.log.criteria[i]) + "\n";
    io::write_bytes_atomic(out + "/iterations.csv", s);
  }
  {
    const est::ModulationTrack& tr = r.log.final_track;
    std::string s = "frame,time_sample,delta_coarse,offset_c,gamma_prime_hat\n";
    for (size_t n = 0; n < tr.gp_frames.size(); ++n)
      s += std::to_string(n) + "," + std::to_string(n * sys.a) + "," +
           std::to_string(static_cast<long long>(tr.delta[n])) + "," +
           std::to_string(tr.offset_c[n]) + "," + io::g9(tr.gp_frames[n]) + "\n";
    io::write_bytes_atomic(out + "/track.csv", s);
  }
  {
    const model::PowerSpectrum Shat =
        est::estimate_spectrum(r.log.final_U, sys, e.spectrum_method, e.welch);
    std::string s = "bin,S_hat\n";
    for (size_t k = 0; k < Shat.values.size(); ++k)
      s += std::to_string(k) + "," + io::g9(Shat.values[k]) + "\n";
    io::write_bytes_atomic(out + "/spectrum.csv", s);
  }
  {
    const tf::TFMatrix G = tf::gabor(Y, sys, 0);
    std::string s;
    for (int m = 0; m < sys.M; ++m) {
      for (int n = 0; n < sys.N; ++n) {
        if (n) s += ",";
        s += io::g9(std::abs(G.coef(m, n)));
      }
      s += "\n";
    }
    io::write_bytes_atomic(out + "/spectrogram.csv", s);
  }

  const std::string truth_path = e.input_truth.empty() ? out + "/gamma_true.csv" : e.input_truth;
  if (std::filesystem::exists(truth_path)) {
    const io::CsvTable tab = io::read_csv(truth_path);
    if (tab.header.size() != 3 || tab.rows.size() != static_cast<size_t>(e.L))
      throw io_error("malformed ground-truth file: " + truth_path);
    rvec gp_true(e.L);
    for (int t = 0; t < e.L; ++t) gp_true[t] = tab.rows[t][2];
    r.have_truth = true;
    r.metrics = est::evaluate_track(r.log.final_track.gp_samples, gp_true, e.L);
    r.hit_fraction = est::frame_hit_fraction(r.log.final_track.gp_frames, gp_true, sys.a, e.L);
    std::string s = "metric,value\n";
    s += "rmse_corrected," + io::g9(r.metrics.rmse_corrected) + "\n";
    s += "max_corrected," + io::g9(r.metrics.max_corrected) + "\n";
    s += "rmse_raw," + io::g9(r.metrics.rmse_raw) + "\n";
    s += "max_raw," + io::g9(r.metrics.max_raw) + "\n";
    s += "offset," + io::g9(r.metrics.offset) + "\n";
    s += "hit_fraction," + io::g9(r.hit_fraction) + "\n";
    s += "iterations," + std::to_string(r.log.iterations) + "\n";
    s += "converged," + std::string(r.log.converged ? "1" : "0") + "\n";
    s += "final_criterion," +
         io::g9(r.log.criteria.empty() ? 0.0 : r.log.criteria.back()) + "\n";
    io::write_bytes_atomic(out + "/metrics.csv", s);
  }
  io::write_bytes_atomic(out + "/config_echo.cfg", canonical_config(e));
  if (verbose)
    std::fprintf(stderr, "estimate: %d iterations, final criterion %s\n", r.log.iterations,
                 io::g9(r.log.criteria.empty() ? 0.0 : r.log.criteria.back()).c_str());
  return r;
}

// synth + estimate in one output directory
inline EstimateResult cmd_run(const ExperimentConfig& e, const std::string& out,
                              bool verbose = false) {
  cmd_synth(e, out, verbose);
  ExperimentConfig e2 = e;
  e2.input_signal.clear();  // consume the freshly written signal
  e2.input_truth.clear();
  return cmd_estimate(e2, out, verbose);
}

// ---------------------------------------------------------------------------
// cmd_montecarlo

struct MonteCarloSummary {
  int completed = 0;
  int failed = 0;
  std::vector<rvec> criteria;  // per completed run
};

inline MonteCarloSummary cmd_montecarlo(const ExperimentConfig& e, const std::string& out,
                                        int workers = 1, bool verbose = false) {
  if (e.num_realizations < 2)
    throw config_error("config key 'num_realizations': montecarlo needs >= 2");
  io::ensure_dir(out);
  const int n = e.num_realizations;

  struct RunOutcome {
    bool ok = false;
    std::string error;
    EstimateResult res;
  };
  std::vector<RunOutcome> outcomes(n);
  std::atomic<int> next{0};
  auto work = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      ExperimentConfig ei = e;
      ei.seed = e.seed + static_cast<std::uint64_t>(i);
      char sub[32];
      std::snprintf(sub, sizeof sub, "/run_%03d", i);
      try {
        outcomes[i].res = cmd_run(ei, out + sub, false);
        outcomes[i].ok = true;
      } catch (const std::exception& ex) {
        outcomes[i].error = ex.what();
        warn(std::string("montecarlo run ") + std::to_string(i) + " failed: " + ex.what());
      }
    }
  };
  const int nw = std::max(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (int w = 1; w < nw; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  MonteCarloSummary sum;
  size_t max_iters = 0;
  for (const RunOutcome& o : outcomes) {
    if (o.ok) {
      ++sum.completed;
      sum.criteria.push_back(o.res.log.criteria);
      max_iters = std::max(max_iters, o.res.log.criteria.size());
    } else {
      ++sum.failed;
    }
  }
  if (sum.completed * 5 < n * 4)
    throw numeric_error("montecarlo: only " + std::to_string(sum.completed) + "/" +
                        std::to_string(n) + " runs completed (need 80%)");

  {
    std::string s = "iter,mean_criterion,std_criterion\n";
    for (size_t it = 0; it < max_iters; ++it) {
      double m = 0.0;
      int cnt = 0;
      for (const rvec& c : sum.criteria)
        if (it < c.size()) {
          m += c[it];
          ++cnt;
        }
      m /= cnt;
      double v = 0.0;
      for (const rvec& c : sum.criteria)
        if (it < c.size()) v += sq(c[it] - m);
      s += std::to_string(it + 1) + "," + io::g9(m) + "," + io::g9(std::sqrt(v / cnt)) + "\n";
    }
    io::write_bytes_atomic(out + "/convergence.csv", s);
  }
  {
    std::string s =
        "run,seed,status,iterations,final_criterion,rmse_corrected,max_corrected,rmse_raw,"
        "max_raw,hit_fraction\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < n; ++i) {
      const RunOutcome& o = outcomes[i];
      const est::TrackMetrics m = o.ok ? o.res.metrics : est::TrackMetrics{nan, nan, nan, nan, nan};
      s += std::to_string(i) + "," + std::to_string(e.seed + i) + "," +
           (o.ok ? "ok" : "failed") + "," +
           std::to_string(o.ok ? o.res.log.iterations : 0) + "," +
           io::g9(o.ok && !o.res.log.criteria.empty() ? o.res.log.criteria.back() : nan) + "," +
           io::g9(m.rmse_corrected) + "," + io::g9(m.max_corrected) + "," + io::g9(m.rmse_raw) +
           "," + io::g9(m.max_raw) + "," + io::g9(o.ok ? o.res.hit_fraction : nan) + "\n";
    }
    io::write_bytes_atomic(out + "/metrics_summary.csv", s);
  }
  io::write_bytes_atomic(out + "/config_echo.cfg", canonical_config(e));
  if (verbose)
    std::fprintf(stderr, "montecarlo: %d/%d runs completed\n", sum.completed, n);
  return sum;
}

}  // namespace wbfm::cli
