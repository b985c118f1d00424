#include "strav/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "strav/image_io.hpp"
#include "strav/pyramid.hpp"
#include "strav/spatial_agg.hpp"
#include "strav/temporal_agg.hpp"

namespace strav {

void PipelineConfig::validate() const {
  if (scale != 1 && scale != 2 && scale != 4 && scale != 8)
    throw std::invalid_argument("scale must be 1, 2, 4 or 8");
  if (reference_window < 1)
    throw std::invalid_argument("reference_window must be at least 1");
  if (flow_radius < 0) throw std::invalid_argument("flow_radius must be >= 0");
  if (patch < 1) throw std::invalid_argument("patch must be positive");
  if (pyramid_levels < 1)
    throw std::invalid_argument("pyramid_levels must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be positive");
  if (tau <= 0.0 || tau_s <= 0.0)
    throw std::invalid_argument("temperatures must be positive");
  if (visible_threshold < 0.0)
    throw std::invalid_argument("visible_threshold must be >= 0");
}

int PipelineConfig::pad_multiple() const {
  return scale * std::lcm(patch, 1 << (pyramid_levels - 1));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& v) {
  std::size_t pos = 0;
  const int n = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return n;
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("not a boolean");
}

}  // namespace

void set_config_value(PipelineConfig& cfg, const std::string& key,
                      const std::string& value) {
  try {
    if (key == "scale") cfg.scale = parse_int(value);
    else if (key == "reference_window") cfg.reference_window = parse_int(value);
    else if (key == "flow_radius") cfg.flow_radius = parse_int(value);
    else if (key == "tau") cfg.tau = parse_double(value);
    else if (key == "tau_s") cfg.tau_s = parse_double(value);
    else if (key == "patch") cfg.patch = parse_int(value);
    else if (key == "visible_threshold") cfg.visible_threshold = parse_double(value);
    else if (key == "emit_intermediates") cfg.emit_intermediates = parse_bool(value);
    else if (key == "pyramid_levels") cfg.pyramid_levels = parse_int(value);
    else if (key == "workers") cfg.workers = parse_int(value);
    else if (key == "alignment_mode") {
      if (value == "both") cfg.alignment_mode = AlignmentMode::both;
      else if (value == "affine_only") cfg.alignment_mode = AlignmentMode::affine_only;
      else if (value == "flow_only") cfg.alignment_mode = AlignmentMode::flow_only;
      else throw std::invalid_argument("expected both|affine_only|flow_only");
    } else if (key == "residual_mode") {
      if (value == "none") cfg.residual_mode = ResidualMode::none;
      else if (value == "temporal") cfg.residual_mode = ResidualMode::temporal;
      else if (value == "full") cfg.residual_mode = ResidualMode::full;
      else throw std::invalid_argument("expected none|temporal|full");
    } else {
      throw std::runtime_error("unknown config key: " + key);
    }
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error("bad value for config key '" + key + "': " +
                             value + " (" + e.what() + ")");
  }
}

PipelineConfig load_config(const std::filesystem::path& file,
                           PipelineConfig base) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read config file: " + file.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) +
                               ": expected key = value");
    set_config_value(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  base.validate();
  return base;
}

//==============================================================================
// Sequence core
//==============================================================================

namespace {

struct BBox {
  bool has = false;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

BBox mask_bbox(const Mask& m) {
  BBox b;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(y, x) <= 0.0f) continue;
      if (!b.has) {
        b = {true, x, y, x, y};
      } else {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
  return b;
}

bool overlaps(const BBox& a, const BBox& b) {
  return a.has && b.has && a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 &&
         b.y0 <= a.y1;
}

// One reference-pool entry, kept at low resolution only.
struct LowEntry {
  Frame low;
  Mask mask_low;
  BBox hole_bbox;  // the raw frame's hole footprint at low res
};

LowEntry make_raw_entry(const RefFrameData& d, int multiple, int s) {
  const PaddedInput p = pad_to_multiple(d.frame, d.mask, multiple);
  LowEntry e;
  // Zero hole content before averaging so unknown pixels never leak into the
  // low-res pool; the conservative mask marks those cells unusable anyway.
  e.low = downsample(elementwise_mul(p.frame, invert(p.mask)), s);
  e.mask_low = downsample_mask(p.mask, s);
  e.hole_bbox = mask_bbox(e.mask_low);
  return e;
}

// Winning donor per lowest-level pixel, encoded as (source index + 1)/255.
Mask top_donor_map(const TemporalAttention& att,
                   const std::vector<AlignedReference>& aligned) {
  Mask top(att.c_visible.height(), att.c_visible.width(), 0.0f);
  for (int y = 0; y < top.height(); ++y)
    for (int x = 0; x < top.width(); ++x) {
      int best = -1;
      float best_w = 0.0f;
      for (std::size_t k = 0; k < att.weights.size(); ++k) {
        const float w = att.weights[k].at(y, x);
        if (w > best_w) {
          best_w = w;
          best = static_cast<int>(k);
        }
      }
      if (best >= 0) {
        const int src =
            aligned[static_cast<std::size_t>(att.ref_slots[best])].source_index;
        top.at(y, x) = static_cast<float>(src + 1) / 255.0f;
      }
    }
  return top;
}

}  // namespace

void run_sequence(const SequenceIO& io, const PipelineConfig& cfg) {
  cfg.validate();
  if (io.count <= 0) throw std::invalid_argument("empty sequence");
  if (!io.load_raw || !io.sink || !io.load_completed)
    throw std::invalid_argument("sequence io callbacks missing");

  const int multiple = cfg.pad_multiple();
  const int s = cfg.scale;

  std::map<int, LowEntry> raw_pool;
  std::map<int, LowEntry> completed_pool;
  int H0 = -1, W0 = -1;

  const auto check_dims = [&](const RefFrameData& d, int index) {
    if (!d.mask.same_shape(d.frame))
      throw DimensionMismatch("frame " + std::to_string(index) +
                              ": mask dims differ from frame");
    if (H0 < 0) {
      H0 = d.frame.height();
      W0 = d.frame.width();
    } else if (d.frame.height() != H0 || d.frame.width() != W0) {
      throw DimensionMismatch("frame " + std::to_string(index) +
                              ": dims differ from the sequence");
    }
  };

  for (int t = 0; t < io.count; ++t) {
    // Drop pool entries that fell out of the reference window.
    const auto evict = [&](std::map<int, LowEntry>& pool) {
      for (auto it = pool.begin(); it != pool.end();)
        it = (it->first < t - cfg.reference_window) ? pool.erase(it) : ++it;
    };
    evict(raw_pool);
    evict(completed_pool);

    RefFrameData raw = io.load_raw(t);
    check_dims(raw, t);
    const PaddedInput padded = pad_to_multiple(raw.frame, raw.mask, multiple);

    FrameOutput out;

    if (raw.mask.count_nonzero() == 0) {
      // Nothing to inpaint: the input passes through bit-exactly and joins
      // the pool as a pristine reference.
      out.full = raw.frame;
      out.low = downsample(padded.frame, s);
      out.prefill_low = out.low;
      const int lh = out.low.height(), lw = out.low.width();
      out.leftover_low = Mask(lh, lw, 0.0f);
      out.c_visible_low = Mask(lh, lw, 0.0f);
      out.top1_low = Mask(lh, lw, 0.0f);
      LowEntry e;
      e.low = out.low;
      e.mask_low = Mask(lh, lw, 0.0f);
      raw_pool[t] = std::move(e);
      io.sink(t, out);
      continue;
    }

    // Low-res target.
    Frame x_low = downsample(elementwise_mul(padded.frame, invert(padded.mask)), s);
    Mask m_low = downsample_mask(padded.mask, s);
    const BBox target_bbox = mask_bbox(m_low);
    {
      LowEntry e;
      e.low = x_low;
      e.mask_low = m_low;
      e.hole_bbox = target_bbox;
      raw_pool[t] = std::move(e);
    }

    // Reference selection: the nearest frames by temporal distance, earlier
    // side first on ties.
    std::vector<int> candidates;
    for (int d = 1; static_cast<int>(candidates.size()) < cfg.reference_window &&
                    (t - d >= 0 || t + d < io.count);
         ++d) {
      if (t - d >= 0) candidates.push_back(t - d);
      if (static_cast<int>(candidates.size()) < cfg.reference_window &&
          t + d < io.count)
        candidates.push_back(t + d);
    }

    // A completed frame is preferred over its raw version when the raw hole
    // would deny the region we need; otherwise the raw frame's genuine
    // pixels are the safer donor.
    std::map<int, bool> use_completed;
    std::vector<ReferenceInput> ref_inputs;
    ref_inputs.reserve(candidates.size());
    for (int r : candidates) {
      auto it = raw_pool.find(r);
      if (it == raw_pool.end()) {
        RefFrameData d = io.load_raw(r);
        check_dims(d, r);
        it = raw_pool.emplace(r, make_raw_entry(d, multiple, s)).first;
      }
      const LowEntry* entry = &it->second;
      bool completed = false;
      const auto ct = completed_pool.find(r);
      if (ct != completed_pool.end() &&
          overlaps(it->second.hole_bbox, target_bbox)) {
        entry = &ct->second;
        completed = true;
      }
      use_completed[r] = completed;
      ref_inputs.push_back({&entry->low, &entry->mask_low, r, std::abs(r - t)});
    }

    JointAlignConfig jcfg;
    jcfg.flow_radius = cfg.flow_radius;
    jcfg.flow_levels = cfg.pyramid_levels;
    jcfg.use_affine = cfg.alignment_mode != AlignmentMode::flow_only;
    jcfg.use_flow = cfg.alignment_mode != AlignmentMode::affine_only;
    jcfg.workers = cfg.workers;

    std::vector<AlignedReference> aligned;
    if (ref_inputs.empty()) {
      out.spatial_only = true;
      std::cerr << "frame " << t << ": no references available; spatial-only path\n";
    } else {
      try {
        aligned = joint_align(x_low, m_low, ref_inputs, jcfg);
      } catch (const NoUsableReference&) {
        out.spatial_only = true;
        std::cerr << "frame " << t << ": no usable reference; spatial-only path\n";
      }
    }

    TemporalConfig tcfg;
    tcfg.tau = cfg.tau;
    tcfg.visible_threshold = cfg.visible_threshold;
    tcfg.pyramid_levels = cfg.pyramid_levels;
    TemporalResult tr;
    if (aligned.empty()) {
      // No donors at all: the whole hole is leftover, pre-filled by
      // diffusion — the same shape the temporal stage reports when every
      // reference is excluded.
      const int factor = 1 << (cfg.pyramid_levels - 1);
      tr.attention.temperature = cfg.tau;
      tr.attention.factor = factor;
      tr.attention.c_visible =
          Mask(x_low.height() / factor, x_low.width() / factor, 0.0f);
      tr.leftover = binarize(m_low, 0.0f);
      tr.y = push_pull_fill(x_low, tr.leftover);
    } else {
      tr = temporal_inpaint(x_low, m_low, aligned, tcfg);
    }

    SpatialAttention satt;
    Frame y2 = tr.y;
    if (tr.leftover.count_nonzero() > 0) {
      try {
        satt = spatial_attention(tr.y, tr.leftover, cfg.patch, cfg.tau_s);
        y2 = spatial_transfer(tr.y, tr.leftover, satt);
      } catch (const SpatialContextUnavailable&) {
        satt = SpatialAttention{};
        std::cerr << "frame " << t
                  << ": no leftover-free patch; keeping diffusion fill\n";
      }
    }

    AssembleConfig acfg;
    acfg.scale = s;
    acfg.patch = cfg.patch;
    acfg.visible_threshold = cfg.visible_threshold;
    acfg.temporal_residuals = cfg.residual_mode != ResidualMode::none;
    acfg.spatial_residuals = cfg.residual_mode == ResidualMode::full;

    const DonorLoader loader = [&](int src) {
      RefFrameData d;
      if (use_completed.at(src)) {
        d.frame = io.load_completed(src);
        d.mask = Mask(d.frame.height(), d.frame.width(), 0.0f);
      } else {
        d = io.load_raw(src);
      }
      PaddedInput p = pad_to_multiple(d.frame, d.mask, multiple);
      return RefFrameData{std::move(p.frame), std::move(p.mask)};
    };

    const HighResAssembly as =
        assemble(padded.frame, padded.mask, y2, tr.leftover, tr.attention,
                 aligned, satt, loader, acfg);

    out.full = unpad(as.result, padded.record);
    out.top1_low = upsample_mask_nearest(top_donor_map(tr.attention, aligned),
                                         tr.attention.factor);
    out.c_visible_low =
        upsample_mask_nearest(tr.attention.c_visible, tr.attention.factor);
    out.low = std::move(y2);
    out.prefill_low = std::move(tr.y);
    out.leftover_low = std::move(tr.leftover);
    out.aligned = std::move(aligned);

    io.sink(t, out);

    // Pool reentry: what later frames can read back is the 8-bit quantized
    // result, so that is what the low-res pool mirrors.
    {
      const Frame q = quantize8(out.full);
      const PaddedInput qp =
          pad_to_multiple(q, Mask(q.height(), q.width(), 0.0f), multiple);
      LowEntry e;
      e.low = downsample(qp.frame, s);
      e.mask_low = downsample_mask(qp.mask, s);
      e.hole_bbox = target_bbox;
      completed_pool[t] = std::move(e);
    }
  }
}

std::vector<FrameOutput> run_in_memory(const std::vector<Frame>& frames,
                                       const std::vector<Mask>& masks,
                                       const PipelineConfig& cfg) {
  if (frames.size() != masks.size())
    throw std::invalid_argument("frame/mask counts differ");
  std::vector<FrameOutput> outs(frames.size());
  std::map<int, Frame> completed;
  SequenceIO io;
  io.count = static_cast<int>(frames.size());
  io.load_raw = [&](int i) {
    return RefFrameData{frames[static_cast<std::size_t>(i)],
                        masks[static_cast<std::size_t>(i)]};
  };
  io.load_completed = [&](int i) { return completed.at(i); };
  io.sink = [&](int i, const FrameOutput& out) {
    completed[i] = quantize8(out.full);
    outs[static_cast<std::size_t>(i)] = out;
    outs[static_cast<std::size_t>(i)].aligned.clear();
  };
  run_sequence(io, cfg);
  return outs;
}

std::optional<MetricReport> run(const VideoJob& job, const PipelineConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;

  const std::vector<std::string> stems = list_stems(job.frames_dir, ".ppm");
  const std::vector<std::string> mask_stems = list_stems(job.masks_dir, ".pgm");
  if (stems.empty())
    throw std::runtime_error("no .ppm frames in " + job.frames_dir.string());
  if (stems != mask_stems)
    throw std::runtime_error("frame and mask file sets do not match");

  const bool has_gt = !job.gt_dir.empty();
  fs::create_directories(job.out_dir);
  const fs::path inter_dir = job.out_dir / "intermediate";
  if (cfg.emit_intermediates) fs::create_directories(inter_dir);

  std::vector<FrameMetrics> per_frame(stems.size());

  SequenceIO io;
  io.count = static_cast<int>(stems.size());
  io.load_raw = [&](int i) {
    const std::string& stem = stems[static_cast<std::size_t>(i)];
    try {
      RefFrameData d;
      d.frame = read_frame(job.frames_dir / (stem + ".ppm"));
      d.mask = read_mask(job.masks_dir / (stem + ".pgm"));
      return d;
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + stem + ": " + e.what());
    }
  };
  io.load_completed = [&](int i) {
    const std::string& stem = stems[static_cast<std::size_t>(i)];
    try {
      return read_frame(job.out_dir / (stem + ".ppm"));
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + stem + ": " + e.what());
    }
  };
  io.sink = [&](int i, const FrameOutput& out) {
    const std::string& stem = stems[static_cast<std::size_t>(i)];
    try {
      write_frame(job.out_dir / (stem + ".ppm"), out.full);
      if (cfg.emit_intermediates) {
        write_frame(inter_dir / ("low_" + stem + ".ppm"), out.low);
        write_mask(inter_dir / ("leftover_" + stem + ".pgm"), out.leftover_low);
        write_gray(inter_dir / ("cvis_" + stem + ".pgm"), out.c_visible_low);
        write_gray(inter_dir / ("top1_" + stem + ".pgm"), out.top1_low);
      }
      if (has_gt) {
        const Frame gt = read_frame(job.gt_dir / (stem + ".ppm"));
        per_frame[static_cast<std::size_t>(i)] = frame_metrics(quantize8(out.full), gt);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + stem + ": " + e.what());
    }
  };

  run_sequence(io, cfg);

  if (!has_gt) return std::nullopt;
  MetricReport report = make_report(stems, std::move(per_frame));
  std::ofstream csv(job.out_dir / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write metrics.csv");
  csv << to_csv(report);
  return report;
}

}  // namespace strav
