#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "strav/alignment.hpp"
#include "strav/core.hpp"
#include "strav/metrics.hpp"
#include "strav/residual_agg.hpp"

namespace strav {

//==============================================================================
// End-to-end orchestration.
//
// Frames are processed strictly in temporal order: pad, downsample, align
// references, temporal aggregation, spatial aggregation, full-res residual
// aggregation, write. Each completed frame re-enters the reference pool for
// the frames after it. Heavy state is kept at low resolution: the pool caches
// a window of low-res frames, while full-res frames are streamed one at a
// time (the target plus, transiently, one residual donor).
//==============================================================================

enum class AlignmentMode { both, affine_only, flow_only };
enum class ResidualMode { none, temporal, full };

struct PipelineConfig {
  int scale = 4;               // low res = full res / scale
  int reference_window = 20;   // max reference frames per target
  int flow_radius = 2;         // flow alignment only within this distance
  double tau = 0.5;            // temporal attention temperature
  double tau_s = 0.5;          // spatial attention temperature
  int patch = 8;               // spatial attention patch size (low res)
  double visible_threshold = 1e-3;
  bool emit_intermediates = false;
  int pyramid_levels = 3;
  int workers = 1;             // alignment parallelism (deterministic)
  AlignmentMode alignment_mode = AlignmentMode::both;
  ResidualMode residual_mode = ResidualMode::full;

  void validate() const;  // throws std::invalid_argument
  // Frames are padded (bottom/right, replicated) to this multiple so the
  // low-res stage divides evenly into patches and pyramid levels.
  int pad_multiple() const;
};

// Applies one "key = value" setting; key names match the struct fields.
// Unknown keys or unparsable values throw std::runtime_error.
void set_config_value(PipelineConfig& cfg, const std::string& key,
                      const std::string& value);

// Flat UTF-8 config file: one "key = value" per line, blank lines and
// #-comments ignored. Values override `base`.
PipelineConfig load_config(const std::filesystem::path& file,
                           PipelineConfig base = {});

//==============================================================================
// Sequence processing
//==============================================================================

// Everything the pipeline reports about one completed frame. Buffers are at
// the padded working dims unless noted.
struct FrameOutput {
  Frame full;           // final frame at the original dims
  Frame low;            // refined low-res result
  Frame prefill_low;    // temporal-stage output before spatial refinement
  Mask leftover_low;    // hole pixels without a temporal donor
  Mask c_visible_low;   // reference coverage in [0,1]
  Mask top1_low;        // winning donor per pixel: (source index + 1)/255, 0 = none
  std::vector<AlignedReference> aligned;  // low-res alignments used
  bool spatial_only = false;  // no usable reference; spatial path only
};

// Callback-based I/O so the same core serves directories and tests.
struct SequenceIO {
  int count = 0;
  // Raw full-res frame + mask by index.
  std::function<RefFrameData(int)> load_raw;
  // Called once per frame, in order, with the completed result.
  std::function<void(int, const FrameOutput&)> sink;
  // Returns the completed full-res frame (8-bit quantized) of an earlier
  // index, as delivered to the sink.
  std::function<Frame(int)> load_completed;
};

void run_sequence(const SequenceIO& io, const PipelineConfig& cfg);

// Convenience wrapper for in-memory sequences; keeps every FrameOutput
// (with `aligned` cleared to bound memory).
std::vector<FrameOutput> run_in_memory(const std::vector<Frame>& frames,
                                       const std::vector<Mask>& masks,
                                       const PipelineConfig& cfg);

//==============================================================================
// Directory jobs
//==============================================================================

struct VideoJob {
  std::filesystem::path frames_dir;  // numbered .ppm frames
  std::filesystem::path masks_dir;   // matching .pgm masks (255 = hole)
  std::filesystem::path out_dir;     // outputs mirror input names
  std::filesystem::path gt_dir;      // optional; enables the metrics report
};

// Processes every frame; writes outputs (and, when enabled, an
// `intermediate/` directory with low-res result, leftover, coverage and
// top-donor maps per frame). With ground truth, also writes metrics.csv and
// returns the report. I/O failures throw with the frame stem in the message.
std::optional<MetricReport> run(const VideoJob& job, const PipelineConfig& cfg);

}  // namespace strav
