// Command-line frontend: inpaint a frame directory, generate synthetic
// sequences, compare two directories, or report the loss suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "strav/image_io.hpp"
#include "strav/losses.hpp"
#include "strav/metrics.hpp"
#include "strav/pipeline.hpp"
#include "strav/pyramid.hpp"
#include "strav/synthgen.hpp"

namespace fs = std::filesystem;
using namespace strav;

namespace {

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

void write_sequence(const SynthSequence& seq, const fs::path& out) {
  fs::create_directories(out / "frames");
  fs::create_directories(out / "masks");
  fs::create_directories(out / "gt");
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const std::string stem = frame_name(static_cast<int>(i));
    write_frame(out / "frames" / (stem + ".ppm"), seq.frames[i]);
    write_mask(out / "masks" / (stem + ".pgm"), seq.masks[i]);
    write_frame(out / "gt" / (stem + ".ppm"), seq.gt[i]);
  }
}

int cmd_inpaint(const CLI::App& sub, const std::string& config_file,
                const VideoJob& job, const PipelineConfig& flags) {
  PipelineConfig cfg;
  if (!config_file.empty()) cfg = load_config(config_file);
  // Explicit flags win over the config file.
  if (sub.count("--scale")) cfg.scale = flags.scale;
  if (sub.count("--refs")) cfg.reference_window = flags.reference_window;
  if (sub.count("--flow-radius")) cfg.flow_radius = flags.flow_radius;
  if (sub.count("--temp")) cfg.tau = flags.tau;
  if (sub.count("--temp-spatial")) cfg.tau_s = flags.tau_s;
  if (sub.count("--patch")) cfg.patch = flags.patch;
  if (sub.count("--visible-threshold"))
    cfg.visible_threshold = flags.visible_threshold;
  if (sub.count("--levels")) cfg.pyramid_levels = flags.pyramid_levels;
  if (sub.count("--workers")) cfg.workers = flags.workers;
  if (sub.count("--emit-intermediates")) cfg.emit_intermediates = true;
  if (sub.count("--alignment-mode"))
    cfg.alignment_mode = flags.alignment_mode;
  if (sub.count("--residual-mode")) cfg.residual_mode = flags.residual_mode;
  cfg.validate();

  const auto report = strav::run(job, cfg);
  if (report) {
    std::cout << to_csv(*report);
    std::printf("# mean psnr %.6f  ssim %.6f  l1 %.6f\n", report->mean.psnr,
                report->mean.ssim, report->mean.l1);
  }
  return 0;
}

int cmd_synth(const std::string& suite, std::uint32_t seed, const fs::path& out,
              int frames, int low_size, int scale, bool list) {
  if (list) {
    for (const auto& [name, spec] : standard_suites()) {
      (void)spec;
      std::cout << name << "\n";
    }
    return 0;
  }
  SynthSpec spec = suite_by_name(suite);
  spec.seed = seed;
  if (frames > 0) spec.frames = frames;
  if (low_size > 0) {
    spec.low_width = low_size;
    spec.low_height = low_size;
  }
  if (scale > 0) spec.scale = scale;
  write_sequence(generate(spec), out);
  std::cout << "wrote " << spec.frames << " frames under " << out.string()
            << "\n";
  return 0;
}

int cmd_eval(const fs::path& dir_a, const fs::path& dir_b,
             const fs::path& region_dir) {
  const std::vector<std::string> stems = list_stems(dir_a, ".ppm");
  const std::vector<std::string> stems_b = list_stems(dir_b, ".ppm");
  if (stems.empty()) throw std::runtime_error("no .ppm files in " + dir_a.string());
  if (stems != stems_b)
    throw std::runtime_error("directories hold different frame sets");
  std::vector<FrameMetrics> rows;
  rows.reserve(stems.size());
  for (const std::string& stem : stems) {
    const Frame a = read_frame(dir_a / (stem + ".ppm"));
    const Frame b = read_frame(dir_b / (stem + ".ppm"));
    if (region_dir.empty()) {
      rows.push_back(frame_metrics(a, b));
    } else {
      const Mask region = read_mask(region_dir / (stem + ".pgm"));
      rows.push_back(region_metrics(a, b, region));
    }
  }
  std::cout << to_csv(make_report(stems, std::move(rows)));
  return 0;
}

int cmd_eval_losses(const VideoJob& job, PipelineConfig cfg) {
  cfg.validate();
  if (job.gt_dir.empty()) throw std::runtime_error("--gt is required");

  const std::vector<std::string> stems = list_stems(job.frames_dir, ".ppm");
  if (stems.empty())
    throw std::runtime_error("no .ppm frames in " + job.frames_dir.string());
  if (stems != list_stems(job.masks_dir, ".pgm"))
    throw std::runtime_error("frame and mask file sets do not match");

  const int multiple = cfg.pad_multiple();
  SequenceSample sample;
  std::vector<std::vector<AlignedReference>> refs;
  std::vector<Mask> c_visible, leftover;
  std::vector<Frame> x_tilde;
  std::map<int, Frame> completed;

  SequenceIO io;
  io.count = static_cast<int>(stems.size());
  io.load_raw = [&](int i) {
    RefFrameData d;
    d.frame = read_frame(job.frames_dir / (stems[i] + ".ppm"));
    d.mask = read_mask(job.masks_dir / (stems[i] + ".pgm"));
    return d;
  };
  io.load_completed = [&](int i) { return completed.at(i); };
  io.sink = [&](int i, const FrameOutput& out) {
    completed[i] = quantize8(out.full);
    // Low-res views of input and ground truth for the loss suite.
    RefFrameData d = io.load_raw(i);
    const PaddedInput p = pad_to_multiple(d.frame, d.mask, multiple);
    sample.x.push_back(
        downsample(elementwise_mul(p.frame, invert(p.mask)), cfg.scale));
    sample.m.push_back(downsample_mask(p.mask, cfg.scale));
    const Frame gt = read_frame(job.gt_dir / (stems[i] + ".ppm"));
    const PaddedInput pg =
        pad_to_multiple(gt, Mask(gt.height(), gt.width(), 0.0f), multiple);
    sample.gt.push_back(downsample(pg.frame, cfg.scale));
    sample.y.push_back(out.low);
    refs.push_back(out.aligned);
    c_visible.push_back(out.c_visible_low);
    leftover.push_back(out.leftover_low);
    x_tilde.push_back(out.prefill_low);
  };
  run_sequence(io, cfg);

  const LossBreakdown l =
      compute_losses(sample, refs, c_visible, leftover, x_tilde);
  const LossWeights w;
  std::printf("l_align=%.6f\n", l.align);
  std::printf("l_hole_visible=%.6f\n", l.visible);
  std::printf("l_hole_leftover=%.6f\n", l.leftover);
  std::printf("l_non_hole=%.6f\n", l.non_hole);
  std::printf("l_perceptual=%.6f\n", l.perceptual);
  std::printf("l_style=%.6f\n", l.style);
  std::printf("l_rec=%.6f\n", l.reconstruction);
  std::printf("l_adv=%.6f\n", l.adversarial);
  std::printf("total=%.6f\n", total(l, w));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video inpainting by aligned reference aggregation"};
  app.require_subcommand(1);

  // inpaint
  VideoJob job;
  PipelineConfig flags;
  std::string config_file;
  std::string alignment_mode = "both", residual_mode = "full";
  auto* inpaint = app.add_subcommand("inpaint", "Inpaint a frame directory");
  inpaint->add_option("--frames", job.frames_dir, "Input .ppm directory")->required();
  inpaint->add_option("--masks", job.masks_dir, "Mask .pgm directory (255 = hole)")->required();
  inpaint->add_option("--out", job.out_dir, "Output directory")->required();
  inpaint->add_option("--gt", job.gt_dir, "Ground-truth directory (enables metrics.csv)");
  inpaint->add_option("--scale", flags.scale, "Downsample factor (1,2,4,8)");
  inpaint->add_option("--refs", flags.reference_window, "Reference frames per target");
  inpaint->add_option("--flow-radius", flags.flow_radius, "Flow alignment temporal radius");
  inpaint->add_option("--temp", flags.tau, "Temporal attention temperature");
  inpaint->add_option("--temp-spatial", flags.tau_s, "Spatial attention temperature");
  inpaint->add_option("--patch", flags.patch, "Spatial patch size (low res)");
  inpaint->add_option("--visible-threshold", flags.visible_threshold, "Coverage threshold");
  inpaint->add_option("--levels", flags.pyramid_levels, "Feature pyramid levels");
  inpaint->add_option("--workers", flags.workers, "Alignment worker threads");
  inpaint->add_flag("--emit-intermediates", "Write per-frame diagnostic maps");
  inpaint->add_option("--alignment-mode", alignment_mode, "both|affine_only|flow_only");
  inpaint->add_option("--residual-mode", residual_mode, "none|temporal|full");
  inpaint->add_option("--config", config_file, "key = value config file");

  // synth
  std::string suite = "pan";
  std::uint32_t seed = 0;
  fs::path synth_out;
  int synth_frames = 0, synth_low = 0, synth_scale = 0;
  bool synth_list = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence");
  synth->add_option("--suite", suite, "Suite name (see --list)");
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory (frames/, masks/, gt/)");
  synth->add_option("--frames", synth_frames, "Override frame count");
  synth->add_option("--low-size", synth_low, "Override low-res width/height");
  synth->add_option("--scale", synth_scale, "Override downsample factor");
  synth->add_flag("--list", synth_list, "List suite names and exit");

  // eval
  fs::path eval_a, eval_b, eval_region;
  auto* eval = app.add_subcommand("eval", "Compare two frame directories");
  eval->add_option("--a", eval_a, "First directory")->required();
  eval->add_option("--b", eval_b, "Second directory")->required();
  eval->add_option("--region", eval_region, "Restrict metrics to mask regions");

  // eval-losses
  VideoJob loss_job;
  PipelineConfig loss_cfg;
  auto* evall = app.add_subcommand("eval-losses", "Report the loss suite for a job");
  evall->add_option("--frames", loss_job.frames_dir, "Input .ppm directory")->required();
  evall->add_option("--masks", loss_job.masks_dir, "Mask .pgm directory")->required();
  evall->add_option("--gt", loss_job.gt_dir, "Ground-truth directory")->required();
  evall->add_option("--scale", loss_cfg.scale, "Downsample factor");
  evall->add_option("--refs", loss_cfg.reference_window, "Reference frames per target");

  CLI11_PARSE(app, argc, argv);

  try {
    if (inpaint->parsed()) {
      if (alignment_mode == "both") flags.alignment_mode = AlignmentMode::both;
      else if (alignment_mode == "affine_only") flags.alignment_mode = AlignmentMode::affine_only;
      else if (alignment_mode == "flow_only") flags.alignment_mode = AlignmentMode::flow_only;
      else throw std::runtime_error("bad --alignment-mode: " + alignment_mode);
      if (residual_mode == "none") flags.residual_mode = ResidualMode::none;
      else if (residual_mode == "temporal") flags.residual_mode = ResidualMode::temporal;
      else if (residual_mode == "full") flags.residual_mode = ResidualMode::full;
      else throw std::runtime_error("bad --residual-mode: " + residual_mode);
      return cmd_inpaint(*inpaint, config_file, job, flags);
    }
    if (synth->parsed()) {
      if (!synth_list && synth_out.empty())
        throw std::runtime_error("--out is required");
      return cmd_synth(suite, seed, synth_out, synth_frames, synth_low,
                       synth_scale, synth_list);
    }
    if (eval->parsed()) return cmd_eval(eval_a, eval_b, eval_region);
    if (evall->parsed()) return cmd_eval_losses(loss_job, loss_cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
