#pragma once

// CSV and plot artifacts for a Monte Carlo batch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgddf/evaluation.hpp"
#include "fgddf/scenarios/config.hpp"
#include "fgddf/svg_plot.hpp"

namespace fgddf {

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

}  // namespace detail

inline double step_dt(const scenarios::ScenarioConfig& c) { return c.scenario == "cl" ? c.cl.dt : c.tracking.dt; }

/// Writes every artifact into `dir` (created if needed). Returns the file names.
inline std::vector<std::string> write_outputs(const std::filesystem::path& dir, const scenarios::ScenarioConfig& c,
                                              const std::vector<RunResult>& results, const Summary& s) {
  using detail::num;
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const double dt = step_dt(c);
  const std::size_t T = s.steps.size(), R = s.robots();

  {
    auto f = detail::open_out(dir / "estimates.csv");
    f << "run,timestep,time,robot,state,component,truth,estimate,variance\n";
    for (const auto& r : results)
      for (const auto& e : r.estimates)
        f << e.run << ',' << e.timestep << ',' << num(e.timestep * dt) << ',' << e.robot << ',' << e.state << ',' << e.component << ','
          << num(e.truth) << ',' << num(e.estimate) << ',' << num(e.variance) << '\n';
    files.push_back("estimates.csv");
  }
  {
    auto f = detail::open_out(dir / "nees.csv");
    f << "timestep,time,robot,dim,runs,nees,lower95,upper95\n";
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < R; ++i) {
        const auto& x = s.steps[k][i];
        const auto [lo, hi] = nees_bounds(x.dim, s.runs);
        f << k + 1 << ',' << num((k + 1) * dt) << ',' << i + 1 << ',' << x.dim << ',' << s.runs << ',' << num(x.nees) << ',' << num(lo)
          << ',' << num(hi) << '\n';
      }
    files.push_back("nees.csv");
  }
  {
    auto f = detail::open_out(dir / "conservativeness.csv");
    f << "timestep,time,robot,min_eig_min,min_eig_mean\n";
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < R; ++i)
        f << k + 1 << ',' << num((k + 1) * dt) << ',' << i + 1 << ',' << num(s.steps[k][i].min_eig_min) << ','
          << num(s.steps[k][i].min_eig_mean) << '\n';
    files.push_back("conservativeness.csv");
  }
  {
    auto f = detail::open_out(dir / "lambda.csv");
    f << "timestep,time,robot,lambda_mean,lambda_min,lambda_max,psd_margin_min\n";
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < R; ++i) {
        const auto& x = s.steps[k][i];
        f << k + 1 << ',' << num((k + 1) * dt) << ',' << i + 1 << ',' << num(x.lambda_mean) << ',' << num(x.lambda_min) << ','
          << num(x.lambda_max) << ',' << num(x.psd_margin_min) << '\n';
      }
    files.push_back("lambda.csv");
  }
  {
    auto f = detail::open_out(dir / "comm_bytes.csv");
    f << "timestep,time,robot,bytes_sent,bytes_delivered\n";
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < R; ++i)
        f << k + 1 << ',' << num((k + 1) * dt) << ',' << i + 1 << ',' << num(s.steps[k][i].bytes_sent) << ','
          << num(s.steps[k][i].bytes_delivered) << '\n';
    files.push_back("comm_bytes.csv");
  }
  {
    auto f = detail::open_out(dir / "rmse.csv");
    f << "timestep,time,robot,rmse,sigma,central_rmse,central_sigma";
    if (c.scenario == "cl") f << ",baseline_rmse,baseline_sigma";
    f << '\n';
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < R; ++i) {
        const auto& x = s.steps[k][i];
        f << k + 1 << ',' << num((k + 1) * dt) << ',' << i + 1 << ',' << num(x.rmse) << ',' << num(x.sigma) << ',' << num(x.central_rmse)
          << ',' << num(x.central_sigma);
        if (c.scenario == "cl") f << ',' << num(x.baseline_rmse) << ',' << num(x.baseline_sigma);
        f << '\n';
      }
    files.push_back("rmse.csv");
  }
  {
    auto f = detail::open_out(dir / "delivery_log.csv");
    f << "timestep,sender,recipient,delivered,bytes\n";
    for (const auto& r : results)
      if (r.run == 0)
        for (const auto& d : r.deliveries)
          f << d.timestep << ',' << d.sender + 1 << ',' << d.recipient + 1 << ',' << (d.delivered ? 1 : 0) << ',' << d.bytes << '\n';
    files.push_back("delivery_log.csv");
  }
  {
    auto f = detail::open_out(dir / "summary.csv");
    f << "robot,dim,nees_mean,nees_within_bounds,min_eig_min,lambda_final,bytes_sent_per_step,rmse,sigma,central_rmse";
    if (c.scenario == "cl") f << ",baseline_rmse";
    f << '\n';
    for (std::size_t i = 0; i < R && T > 0; ++i) {
      const auto& last = s.steps[T - 1][i];
      const auto [lo, hi] = nees_bounds(last.dim, s.runs);
      std::size_t within = 0;
      double me = last.min_eig_min;
      for (std::size_t k = 0; k < T; ++k) {
        within += s.steps[k][i].nees >= lo && s.steps[k][i].nees <= hi;
        me = std::min(me, s.steps[k][i].min_eig_min);
      }
      auto rms = [&](auto get) { return std::sqrt(time_average(s, i, [&](const StepSummary& x) { return get(x) * get(x); })); };
      f << i + 1 << ',' << last.dim << ',' << num(time_average(s, i, [](const StepSummary& x) { return x.nees; })) << ','
        << num(static_cast<double>(within) / T) << ',' << num(me) << ',' << num(last.lambda_mean) << ','
        << num(time_average(s, i, [](const StepSummary& x) { return x.bytes_sent; })) << ','
        << num(rms([](const StepSummary& x) { return x.rmse; })) << ',' << num(rms([](const StepSummary& x) { return x.sigma; })) << ','
        << num(rms([](const StepSummary& x) { return x.central_rmse; }));
      if (c.scenario == "cl") f << ',' << num(rms([](const StepSummary& x) { return x.baseline_rmse; }));
      f << '\n';
    }
    files.push_back("summary.csv");
  }

  // Plots.
  std::vector<double> time(T);
  for (std::size_t k = 0; k < T; ++k) time[k] = (k + 1) * dt;
  auto per_robot = [&](const std::string& title, const std::string& ylabel, auto get) {
    PlotSpec p{title, "time [s]", ylabel, {}, false};
    for (std::size_t i = 0; i < R; ++i) {
      PlotSeries ser{"robot " + std::to_string(i + 1), time, std::vector<double>(T), false};
      for (std::size_t k = 0; k < T; ++k) ser.y[k] = get(s.steps[k][i]);
      p.series.push_back(std::move(ser));
    }
    return p;
  };
  if (T > 0 && R > 0 && R <= 10) {
    auto nees_plot = per_robot("Average NEES (" + std::to_string(s.runs) + " runs)", "NEES / dim",
                               [](const StepSummary& x) { return x.nees / x.dim; });
    const auto [lo, hi] = nees_bounds(s.steps[0][0].dim, s.runs);
    const double d = s.steps[0][0].dim;
    nees_plot.series.push_back({"95% bounds (robot 1)", time, std::vector<double>(T, hi / d), true});
    nees_plot.series.push_back({"", time, std::vector<double>(T, lo / d), true});
    write_svg((dir / "nees.svg").string(), nees_plot);
    write_svg((dir / "conservativeness.svg").string(),
              per_robot("min eig(local - centralized covariance)", "min eigenvalue", [](const StepSummary& x) { return x.min_eig_min; }));
    write_svg((dir / "lambda.svg").string(),
              per_robot("Deflation constant", "lambda", [](const StepSummary& x) { return x.lambda_mean; }));
    write_svg((dir / "rmse.svg").string(), per_robot("Position RMSE", "RMSE", [](const StepSummary& x) { return x.rmse; }));
  } else if (T > 0) {
    PlotSpec p{"Average position RMSE over robots", "time [s]", "RMSE [m]", {}, false};
    PlotSeries a{"FG-DDF", time, std::vector<double>(T), false}, b{"CI-CL", time, std::vector<double>(T), false},
        cc{"centralized", time, std::vector<double>(T), false};
    for (std::size_t k = 0; k < T; ++k) {
      for (std::size_t i = 0; i < R; ++i) {
        a.y[k] += s.steps[k][i].rmse / R;
        b.y[k] += s.steps[k][i].baseline_rmse / R;
        cc.y[k] += s.steps[k][i].central_rmse / R;
      }
    }
    p.series = {a, b, cc};
    write_svg((dir / "rmse.svg").string(), p);
    write_svg((dir / "conservativeness.svg").string(),
              PlotSpec{"Worst min eig(local - centralized) over robots", "time [s]", "min eigenvalue",
                       {[&] {
                         PlotSeries w{"FG-DDF", time, std::vector<double>(T), false};
                         for (std::size_t k = 0; k < T; ++k) {
                           w.y[k] = s.steps[k][0].min_eig_min;
                           for (std::size_t i = 1; i < R; ++i) w.y[k] = std::min(w.y[k], s.steps[k][i].min_eig_min);
                         }
                         return w;
                       }()},
                       false});
  }
  for (const char* p : {"nees.svg", "conservativeness.svg", "lambda.svg", "rmse.svg"})
    if (std::filesystem::exists(dir / p)) files.push_back(p);
  return files;
}

}  // namespace fgddf
