#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wlrtr/deblur.hpp"
#include "wlrtr/degradation.hpp"
#include "wlrtr/denoise.hpp"
#include "wlrtr/destripe.hpp"
#include "wlrtr/error.hpp"
#include "wlrtr/fft.hpp"
#include "wlrtr/io.hpp"
#include "wlrtr/quality.hpp"
#include "wlrtr/superres.hpp"

namespace wlrtr {

namespace cli {

struct GroupingFlags {
  GroupingConfig cfg;
  void attach(CLI::App* app) {
    app->add_option("--patch", cfg.patch, "cubic side m")->capture_default_str();
    app->add_option("--k", cfg.k, "similar cubics per group")->capture_default_str();
    app->add_option("--window", cfg.window, "search radius")->capture_default_str();
    app->add_option("--stride", cfg.stride, "key grid step")->capture_default_str();
  }
};

struct KernelFlags {
  std::string file;
  std::vector<double> gaussian;
  std::size_t uniform = 0;
  bool delta = false;

  void attach(CLI::App* app) {
    auto* f = app->add_option("--kernel", file, "kernel as a text matrix");
    auto* g = app->add_option("--gaussian", gaussian, "gaussian kernel: size,std")->delimiter(',')->expected(2);
    auto* u = app->add_option("--uniform", uniform, "uniform kernel of the given size");
    auto* d = app->add_flag("--delta-kernel", delta, "identity kernel");
    f->excludes(g)->excludes(u)->excludes(d);
    g->excludes(u)->excludes(d);
    u->excludes(d);
  }

  Psf make(const KernelSpec& fallback) const {
    if (!file.empty()) return Psf::normalized(load_matrix_text(file));
    if (!gaussian.empty()) {
      if (gaussian[0] < 1.0 || gaussian[0] != std::floor(gaussian[0])) {
        throw Error(ErrorCode::invalid_argument, "gaussian size must be a positive integer");
      }
      return make_kernel(GaussianKernel{static_cast<std::size_t>(gaussian[0]), gaussian[1]});
    }
    if (uniform > 0) return make_kernel(UniformKernel{uniform});
    if (delta) return Psf::delta();
    return make_kernel(fallback);
  }
};

struct InputFlags {
  std::string raw;  // rows,cols,bands,f32|f64

  void attach(CLI::App* app) {
    app->add_option("--raw", raw, "read the first input as headerless data: rows,cols,bands,f32|f64");
  }

  Tensor3 load(const std::string& path) const {
    if (raw.empty()) return load_tensor(path);
    std::vector<std::string> parts;
    std::stringstream ss(raw);
    for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
    if (parts.size() != 4 || (parts[3] != "f32" && parts[3] != "f64")) {
      throw Error(ErrorCode::invalid_argument, "--raw expects rows,cols,bands,f32|f64");
    }
    Dims d;
    try {
      d = {std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2])};
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "--raw dimensions must be integers");
    }
    return load_raw(path, d, parts[3] == "f32" ? DType::f32 : DType::f64);
  }
};

inline const std::map<std::string, GroupPrior>& prior_names() {
  static const std::map<std::string, GroupPrior> names{{"weighted", GroupPrior::tensor_weighted},
                                                       {"uniform", GroupPrior::tensor_uniform},
                                                       {"mode2", GroupPrior::matrix_mode2},
                                                       {"mode3", GroupPrior::matrix_mode3}};
  return names;
}

// Run log: parameters, one line per outer iteration, wall time.
class RunLog {
 public:
  void param(const std::string& key, const std::string& value) { params_.emplace_back(key, value); }
  template <typename T>
  void param(const std::string& key, const T& value) {
    std::ostringstream ss;
    ss.precision(10);
    ss << value;
    param(key, ss.str());
  }

  void write(const std::string& path, const std::string& command, const SolverTrace& trace, double seconds) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write log " + path);
    out << "command " << command << '\n';
    for (const auto& [k, v] : params_) out << "param " << k << ' ' << v << '\n';
    char line[160];
    for (const auto& r : trace.iterations) {
      std::snprintf(line, sizeof line, "iter %d sigma %.6g objective %.17g seconds %.3f\n", r.iteration, r.sigma,
                    r.objective, r.seconds);
      out << line;
    }
    std::snprintf(line, sizeof line, "wall_seconds %.3f\n", seconds);
    out << line;
  }

 private:
  std::vector<std::pair<std::string, std::string>> params_;
};

inline std::string stripe_mode_name(StripeMode m) { return m == StripeMode::additive ? "additive" : "multiplicative"; }

inline std::string kernel_description(const Psf& psf) {
  return std::to_string(psf.kernel().rows()) + "x" + std::to_string(psf.kernel().cols());
}

// Scans argv for --config FILE (or --config=FILE) and turns its key=value
// lines into --key=value arguments placed after the command line, so the
// file wins over flags given on the command line.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> extra;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    for (const auto& [k, v] : load_config_file(path)) extra.push_back("--" + k + "=" + v);
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

}  // namespace cli

// Entry point of the command-line tool. Returns the process exit code:
// 0 success, 1 usage error, 2 failure inside the library or I/O.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Hyperspectral restoration with weighted low-rank tensor recovery", "wlrtr"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.fallthrough();

  unsigned threads = 0;
  std::string config_path;
  app.add_option("--threads", threads, "worker threads (0 = all cores, 1 = sequential)");
  app.add_option("--config", config_path, "key=value file; its entries override command-line flags");

  // Shared solver settings.
  std::string input, output, log_path;
  InputFlags input_flags;
  GroupingFlags grouping;
  ShrinkParams shrink = DenoiseConfig{}.shrink;
  std::string prior_name = "weighted";
  DenoiseConfig dn;
  KernelFlags kernel;

  auto add_io = [&](CLI::App* sub) {
    sub->add_option("input", input, "input tensor (HST1)")->required();
    sub->add_option("output", output, "output tensor (HST1)")->required();
    sub->add_option("--log", log_path, "run log path (default: <output>.log)");
    input_flags.attach(sub);
  };
  auto add_shrink = [&](CLI::App* sub) {
    sub->add_option("--c", shrink.c, "weight constant")->capture_default_str();
    sub->add_option("--eps", shrink.eps, "weight regularizer")->capture_default_str();
    grouping.attach(sub);
  };

  // denoise
  auto* denoise_cmd = app.add_subcommand("denoise", "remove Gaussian noise");
  add_io(denoise_cmd);
  add_shrink(denoise_cmd);
  denoise_cmd->add_option("--sigma", shrink.sigma, "noise level on the 8-bit scale")->required();
  denoise_cmd->add_option("--eta", dn.eta, "group fidelity weight")->capture_default_str();
  denoise_cmd->add_option("--iters", dn.outer_iters, "outer iterations")->capture_default_str();
  denoise_cmd->add_option("--decay", dn.sigma_decay, "sigma re-estimation factor")->capture_default_str();
  denoise_cmd->add_option("--prior", prior_name, "weighted|uniform|mode2|mode3")
      ->check(CLI::IsMember({"weighted", "uniform", "mode2", "mode3"}));
  std::string export_dir;
  denoise_cmd->add_option("--export-bands", export_dir, "also write one PGM per band here");

  // destripe
  DestripeConfig ds;
  std::string stripes_path;
  auto* destripe_cmd = app.add_subcommand("destripe", "remove stripes and noise");
  add_io(destripe_cmd);
  add_shrink(destripe_cmd);
  destripe_cmd->add_option("--sigma", shrink.sigma, "noise level on the 8-bit scale")->required();
  destripe_cmd->add_option("--eta", dn.eta, "group fidelity weight")->capture_default_str();
  destripe_cmd->add_option("--iters", ds.outer_iters, "outer iterations")->capture_default_str();
  destripe_cmd->add_option("--decay", dn.sigma_decay, "sigma re-estimation factor")->capture_default_str();
  destripe_cmd->add_option("--rho", ds.rho, "stripe column threshold (0 = rho-scale * sigma * sqrt(rows))");
  destripe_cmd->add_option("--rho-scale", ds.rho_scale, "automatic rho factor")->capture_default_str();
  destripe_cmd->add_flag("--horizontal", ds.horizontal, "stripes run along rows");
  destripe_cmd->add_option("--stripes", stripes_path, "also write the stripe component");

  // deblur
  DeblurConfig db;
  double deblur_sigma = 0.0;
  auto* deblur_cmd = app.add_subcommand("deblur", "deconvolve a known blur");
  add_io(deblur_cmd);
  add_shrink(deblur_cmd);
  kernel.attach(deblur_cmd);
  deblur_cmd->add_option("--sigma", deblur_sigma, "noise level (0 uses a floor of 1)")->capture_default_str();
  deblur_cmd->add_option("--eta", db.eta, "group fidelity weight")->capture_default_str();
  deblur_cmd->add_option("--alpha0", db.alpha0, "initial penalty")->capture_default_str();
  deblur_cmd->add_option("--delta", db.delta, "penalty growth")->capture_default_str();
  deblur_cmd->add_option("--iters", db.outer_iters, "outer iterations")->capture_default_str();

  // superres
  SuperresConfig sr;
  std::string guide_path, response_path;
  auto* superres_cmd = app.add_subcommand("superres", "fuse a low-resolution cube with a high-resolution guide");
  superres_cmd->add_option("input", input, "low-resolution hyperspectral tensor")->required();
  superres_cmd->add_option("guide", guide_path, "high-resolution multispectral guide")->required();
  superres_cmd->add_option("output", output, "output tensor")->required();
  superres_cmd->add_option("--log", log_path, "run log path (default: <output>.log)");
  input_flags.attach(superres_cmd);
  add_shrink(superres_cmd);
  kernel.attach(superres_cmd);
  superres_cmd->add_option("--sigma", shrink.sigma, "noise level for the prior")->capture_default_str();
  superres_cmd->add_option("--scale", sr.scale, "spatial factor")->capture_default_str();
  superres_cmd->add_option("--response", response_path, "spectral response text matrix (b x B)");
  superres_cmd->add_option("--eta", sr.eta, "group fidelity weight")->capture_default_str();
  superres_cmd->add_option("--beta0", sr.beta0, "initial spatial penalty")->capture_default_str();
  superres_cmd->add_option("--gamma0", sr.gamma0, "initial spectral penalty")->capture_default_str();
  superres_cmd->add_option("--delta", sr.delta, "penalty growth")->capture_default_str();
  superres_cmd->add_option("--iters", sr.outer_iters, "outer iterations")->capture_default_str();
  superres_cmd->add_option("--cg-tol", sr.cg_tol, "conjugate gradient tolerance")->capture_default_str();
  superres_cmd->add_option("--cg-max-iters", sr.cg_max_iters, "conjugate gradient iteration cap")
      ->capture_default_str();

  // degrade
  DegradationSpec spec;
  std::string stripe_mode = "additive";
  auto* degrade_cmd = app.add_subcommand("degrade", "simulate blur, downsampling, stripes and noise");
  add_io(degrade_cmd);
  kernel.attach(degrade_cmd);
  degrade_cmd->add_option("--sigma", spec.sigma, "Gaussian noise level")->capture_default_str();
  degrade_cmd->add_option("--stripe-fraction", spec.stripe_fraction, "striped columns per band")
      ->capture_default_str();
  degrade_cmd->add_option("--stripe-amp", spec.stripe_amp, "stripe amplitude")->capture_default_str();
  degrade_cmd->add_option("--stripe-mode", stripe_mode, "additive|multiplicative")
      ->check(CLI::IsMember({"additive", "multiplicative"}));
  degrade_cmd->add_option("--scale", spec.scale, "spatial downsampling factor")->capture_default_str();
  degrade_cmd->add_option("--seed", spec.seed, "random seed")->capture_default_str();
  degrade_cmd->add_option("--guide", guide_path, "also write the spectrally downsampled guide");
  degrade_cmd->add_option("--response", response_path, "spectral response for --guide");

  // metrics
  std::string ref_path, per_band_path;
  std::size_t metric_scale = 1;
  auto* metrics_cmd = app.add_subcommand("metrics", "compare a result with a reference");
  metrics_cmd->add_option("result", input, "restored tensor")->required();
  metrics_cmd->add_option("reference", ref_path, "ground truth")->required();
  metrics_cmd->add_option("--scale", metric_scale, "ERGAS scale factor")->capture_default_str();
  metrics_cmd->add_option("--per-band", per_band_path, "write per-band PSNR as CSV");
  input_flags.attach(metrics_cmd);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    const std::string log_file = log_path.empty() ? output + ".log" : log_path;
    RunLog log;
    SolverTrace trace;
    log.param("threads", threads);
    auto log_shrink = [&] {
      log.param("c", shrink.c);
      log.param("eps", shrink.eps);
      log.param("patch", grouping.cfg.patch);
      log.param("k", grouping.cfg.k);
      log.param("window", grouping.cfg.window);
      log.param("stride", grouping.cfg.stride);
    };

    if (*denoise_cmd) {
      dn.grouping = grouping.cfg;
      dn.shrink = shrink;
      dn.prior = prior_names().at(prior_name);
      dn.threads = threads;
      const Tensor3 y = input_flags.load(input);
      const Tensor3 x = denoise(y, dn, &trace);
      save_tensor(output, x);
      if (!export_dir.empty()) export_band_images(x, export_dir);
      log.param("sigma", shrink.sigma);
      log_shrink();
      log.param("eta", dn.eta);
      log.param("iters", dn.outer_iters);
      log.param("decay", dn.sigma_decay);
      log.param("prior", prior_name);
      log.write(log_file, "denoise", trace, elapsed());
    } else if (*destripe_cmd) {
      dn.grouping = grouping.cfg;
      dn.shrink = shrink;
      dn.threads = threads;
      ds.denoise = dn;
      const Tensor3 y = input_flags.load(input);
      const DestripeResult r = destripe(y, ds, &trace);
      save_tensor(output, r.x);
      if (!stripes_path.empty()) save_tensor(stripes_path, r.e);
      log.param("sigma", shrink.sigma);
      log_shrink();
      log.param("eta", dn.eta);
      log.param("iters", ds.outer_iters);
      log.param("rho", ds.effective_rho(ds.horizontal ? y.cols() : y.rows()));
      log.param("horizontal", ds.horizontal ? "true" : "false");
      log.write(log_file, "destripe", trace, elapsed());
    } else if (*deblur_cmd) {
      db.grouping = grouping.cfg;
      db.shrink = shrink;
      db.threads = threads;
      const Psf psf = kernel.make(GaussianKernel{});
      const Tensor3 y = input_flags.load(input);
      const Tensor3 x = deblur(y, psf, deblur_sigma, db, &trace);
      save_tensor(output, x);
      log.param("sigma", deblur_sigma);
      log.param("kernel", kernel_description(psf));
      log_shrink();
      log.param("eta", db.eta);
      log.param("alpha0", db.alpha0);
      log.param("delta", db.delta);
      log.param("iters", db.outer_iters);
      log.write(log_file, "deblur", trace, elapsed());
    } else if (*superres_cmd) {
      sr.grouping = grouping.cfg;
      sr.shrink = shrink;
      sr.threads = threads;
      const Psf psf = kernel.make(GaussianKernel{});
      const Tensor3 y = input_flags.load(input);
      const Tensor3 z = load_tensor(guide_path);
      const SpectralResponse response = response_path.empty() ? SpectralResponse::band_groups(y.bands())
                                                              : SpectralResponse(load_matrix_text(response_path));
      const Tensor3 x = superres(y, z, psf, response, sr, &trace);
      save_tensor(output, x);
      log.param("sigma", shrink.sigma);
      log.param("kernel", kernel_description(psf));
      log.param("scale", sr.scale);
      log_shrink();
      log.param("eta", sr.eta);
      log.param("beta0", sr.beta0);
      log.param("gamma0", sr.gamma0);
      log.param("delta", sr.delta);
      log.param("iters", sr.outer_iters);
      log.write(log_file, "superres", trace, elapsed());
    } else if (*degrade_cmd) {
      spec.stripe_mode = stripe_mode == "additive" ? StripeMode::additive : StripeMode::multiplicative;
      spec.validate();
      const Psf psf = kernel.make(DeltaKernel{});
      const Tensor3 truth = input_flags.load(input);
      Tensor3 y = psf.kernel().size() == 1 ? truth : convolve(truth, psf);
      if (spec.scale > 1) y = downsample_spatial(y, Psf::delta(), spec.scale);
      y = add_stripes(y, spec);
      y = add_gaussian_noise(y, spec.sigma, spec.seed);
      save_tensor(output, y);
      if (!guide_path.empty()) {
        const SpectralResponse response = response_path.empty() ? SpectralResponse::band_groups(truth.bands())
                                                                : SpectralResponse(load_matrix_text(response_path));
        save_tensor(guide_path, add_gaussian_noise(downsample_spectral(truth, response), spec.sigma, spec.seed + 1));
      }
      std::ofstream side(output + ".spec.txt");
      if (!side) throw Error(ErrorCode::io_failure, "cannot write " + output + ".spec.txt");
      side << "sigma " << spec.sigma << "\nstripe_fraction " << spec.stripe_fraction << "\nstripe_amp "
           << spec.stripe_amp << "\nstripe_mode " << stripe_mode_name(spec.stripe_mode) << "\nkernel "
           << kernel_description(psf) << "\nscale " << spec.scale << "\nseed " << spec.seed << "\nrng mt19937_64\n";
    } else if (*metrics_cmd) {
      const Tensor3 x = input_flags.load(input);
      const Tensor3 ref = load_tensor(ref_path);
      const QualityReport q = assess(x, ref, metric_scale);
      char line[64];
      for (const auto& [name, value] : {std::pair{"psnr", q.psnr}, {"ssim", q.ssim}, {"ergas", q.ergas},
                                        {"sam", q.sam}}) {
        std::snprintf(line, sizeof line, "%s %.4f\n", name, value);
        out << line;
      }
      if (!per_band_path.empty()) {
        std::ofstream csv(per_band_path);
        if (!csv) throw Error(ErrorCode::io_failure, "cannot write " + per_band_path);
        csv << "band,psnr\n";
        for (std::size_t k = 0; k < q.per_band_psnr.size(); ++k) {
          std::snprintf(line, sizeof line, "%zu,%.4f\n", k, q.per_band_psnr[k]);
          csv << line;
        }
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace wlrtr
