#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage or validation error,
// 3 data error.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "tbss/baseline.hpp"
#include "tbss/error.hpp"
#include "tbss/io.hpp"
#include "tbss/metrics.hpp"
#include "tbss/morphology.hpp"
#include "tbss/phantom.hpp"
#include "tbss/search.hpp"
#include "tbss/volume.hpp"

namespace tbss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::InvalidArgument: return kExitUsage;
    default: return kExitData;
  }
}

/// Grey levels of one slice: probabilities scaled to 0..255, labels 0/128/255,
/// masks 0/255.
inline std::vector<std::uint8_t> render_slice(const AnyVolume& vol, std::size_t n) {
  return std::visit(
      [n](const auto& v) {
        const Dims& d = v.dims();
        if (d.empty()) throw Error(ErrorKind::Degenerate, "cannot render an empty volume");
        if (n >= d.slices) {
          throw Error(ErrorKind::OutOfRange,
                      "slice " + std::to_string(n) + " out of range for " + std::to_string(d.slices) + " slices");
        }
        const auto src = v.slice(n);
        std::vector<std::uint8_t> px(src.size());
        using V = std::decay_t<decltype(v)>;
        for (std::size_t i = 0; i < src.size(); ++i) {
          if constexpr (std::is_same_v<V, ProbabilityVolume>) {
            px[i] = static_cast<std::uint8_t>(std::lround(static_cast<double>(src[i]) * 255.0));
          } else if constexpr (std::is_same_v<V, LabelVolume>) {
            px[i] = src[i] == 0 ? 0 : (src[i] == 1 ? 128 : 255);
          } else {
            px[i] = src[i] ? 255 : 0;
          }
        }
        return px;
      },
      vol);
}

inline std::string pgm(std::size_t rows, std::size_t cols, const std::vector<std::uint8_t>& px) {
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

struct ReconstructArgs {
  std::string inner, outer, out, contours;
  bool no_skeleton = false;
  bool all_contours = false;
};

inline void add_search_options(CLI::App* cmd, SearchParams& p) {
  cmd->add_option("--M", p.section_len, "slices per section")->capture_default_str();
  cmd->add_option("--T-inner", p.threshold_inner, "inner log-probability threshold")->capture_default_str();
  cmd->add_option("--T-outer", p.threshold_outer, "outer log-probability threshold")->capture_default_str();
  cmd->add_option("--S", p.stack, "children explored per expansion")->capture_default_str();
  cmd->add_option("--beam", p.beam_side, "beam side length (odd)")->capture_default_str();
  cmd->add_option("--log-floor", p.log_floor, "probability floor before the log")->capture_default_str();
  cmd->add_flag("--scale-threshold", p.scale_threshold, "scale T by M'/M for short sections");
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Tube beam stack search for tubular boundary reconstruction"};
  app.require_subcommand(1);
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "worker threads (never changes output)")->check(CLI::PositiveNumber);

  // gen
  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen", "generate a synthetic phantom");
  gen->add_option("spec", spec_path, "phantom spec JSON")->required();
  gen->add_option("out_dir", out_dir, "output directory")->required();

  // reconstruct
  SearchParams params;
  ReconstructArgs rec;
  auto* recon = app.add_subcommand("reconstruct", "run the beam stack search");
  recon->add_option("inner", rec.inner, "inner probability TBV")->required();
  recon->add_option("outer", rec.outer, "outer probability TBV")->required();
  recon->add_option("out", rec.out, "output label TBV")->required();
  add_search_options(recon, params);
  recon->add_option("--contours", rec.contours, "also refine and write contours JSON");
  recon->add_flag("--no-skeleton", rec.no_skeleton, "take contours from the raw labels");
  recon->add_flag("--all-contours", rec.all_contours, "keep every traced border in the contours JSON");
  recon->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // baseline
  std::string b_inner, b_outer, b_out, b_contours;
  std::optional<double> fixed;
  bool b_all = false;
  auto* base = app.add_subcommand("baseline", "global threshold baseline");
  base->add_option("inner", b_inner)->required();
  base->add_option("outer", b_outer)->required();
  base->add_option("out", b_out)->required();
  base->add_option("--fixed-threshold", fixed, "use this threshold instead of Otsu")->check(CLI::Range(0.0, 1.0));
  base->add_option("--contours", b_contours, "also write inside contours JSON");
  base->add_flag("--all-contours", b_all);
  base->add_option("--threads", threads)->check(CLI::PositiveNumber);

  // refine
  std::string r_labels, r_out;
  bool r_no_skel = false, r_all = false;
  auto* refine = app.add_subcommand("refine", "skeletonize and extract inside contours");
  refine->add_option("labels", r_labels)->required();
  refine->add_option("contours", r_out)->required();
  refine->add_flag("--no-skeleton", r_no_skel);
  refine->add_flag("--all-contours", r_all);
  refine->add_option("--threads", threads)->check(CLI::PositiveNumber);

  // eval
  std::string e_contours, e_gt, e_meta, e_report, e_csv, e_spacing;
  auto* eval = app.add_subcommand("eval", "Hausdorff evaluation against ground truth");
  eval->add_option("contours", e_contours)->required();
  eval->add_option("gt", e_gt)->required();
  eval->add_option("meta", e_meta)->required();
  eval->add_option("report", e_report, "report JSON; a CSV is written next to it")->required();
  eval->add_option("--csv", e_csv, "CSV path (default: report path with .csv)");
  eval->add_option("--spacing", e_spacing, "voxel spacing JSON; distances in mm");

  // render
  std::string v_path, v_out, v_contours;
  std::size_t v_slice = 0;
  auto* render = app.add_subcommand("render", "write one slice as a PGM image");
  render->add_option("volume", v_path)->required();
  render->add_option("slice", v_slice)->required();
  render->add_option("out", v_out)->required();
  render->add_option("--contours", v_contours, "overlay contours at full intensity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      const auto spec = load_phantom_spec(spec_path);
      const auto ph = generate(spec);
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      save_probability_volume(ph.inner, dir / "inner.tbv");
      save_probability_volume(ph.outer, dir / "outer.tbv");
      save_label_volume(ph.gt, dir / "gt.tbv");
      save_slice_meta(ph.meta, dir / "meta.json");
    } else if (*recon) {
      params.validate();
      const auto inner = load_probability_volume(rec.inner);
      const auto outer = load_probability_volume(rec.outer);
      const auto labels = reconstruct_artery(inner, outer, params, threads);
      save_label_volume(labels, rec.out);
      if (!rec.contours.empty()) {
        const auto c = refine_labels(labels, {!rec.no_skeleton, rec.all_contours, threads});
        save_contours(c, rec.contours, rec.all_contours);
      }
    } else if (*base) {
      const auto inner = load_probability_volume(b_inner);
      const auto outer = load_probability_volume(b_outer);
      const auto labels = baseline_reconstruct(inner, outer, fixed);
      save_label_volume(labels, b_out);
      if (!b_contours.empty()) {
        const auto c = refine_labels(labels, {false, b_all, threads});
        save_contours(c, b_contours, b_all);
      }
    } else if (*refine) {
      const auto labels = load_label_volume(r_labels);
      save_contours(refine_labels(labels, {!r_no_skel, r_all, threads}), r_out, r_all);
    } else if (*eval) {
      const auto contours = load_contours(e_contours);
      const auto gt = load_label_volume(e_gt);
      const auto meta = load_slice_meta(e_meta);
      std::optional<VoxelSpacing> spacing;
      if (!e_spacing.empty()) spacing = load_voxel_spacing(e_spacing);
      const auto report = evaluate(contours, gt, meta, spacing);
      std::filesystem::path csv = e_csv.empty() ? std::filesystem::path(e_report).replace_extension(".csv")
                                                : std::filesystem::path(e_csv);
      save_report(report, e_report, csv);
    } else if (*render) {
      const auto vol = load_any_tbv(v_path);
      auto px = render_slice(vol, v_slice);
      const Dims d = std::visit([](const auto& v) { return v.dims(); }, vol);
      if (!v_contours.empty()) {
        const auto contours = load_contours(v_contours);
        if (v_slice >= contours.size()) {
          throw Error(ErrorKind::OutOfRange, "contours file has no slice " + std::to_string(v_slice));
        }
        for (const auto* c : {&contours[v_slice].inner, &contours[v_slice].outer}) {
          for (const auto& p : c->points) {
            if (p.row >= 0 && p.col >= 0 && static_cast<std::size_t>(p.row) < d.rows &&
                static_cast<std::size_t>(p.col) < d.cols) {
              px[static_cast<std::size_t>(p.row) * d.cols + static_cast<std::size_t>(p.col)] = 255;
            }
          }
        }
      }
      const auto bytes = pgm(d.rows, d.cols, px);
      detail::write_file(v_out, bytes.data(), bytes.size());
    }
  } catch (const Error& e) {
    std::cerr << "tbss: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "tbss: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace tbss::cli
