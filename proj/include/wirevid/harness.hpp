#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wirevid/alloc.hpp"
#include "wirevid/channel.hpp"
#include "wirevid/codec.hpp"
#include "wirevid/config.hpp"
#include "wirevid/metrics.hpp"
#include "wirevid/video.hpp"

namespace wirevid {

struct TrainConfig {
    double lr = 1e-5;
    int jscc_batch = 4;
    int dqn_batch = 8;
    int patience = 8;        // epochs without val improvement before stopping
    int lr_decay_after = 4;  // bad epochs before the rate is cut
    double lr_decay = 0.8;
    double snr_min = -5.0, snr_max = 20.0;
    int epochs = 50;
    int steps_per_epoch = 0;  // 0: one pass worth of groups per epoch
    int episodes = 1000;      // allocator episodes
    int crop_h = 0, crop_w = 0;  // 0: full frames
    uint64_t seed = 1;
};

TrainConfig train_config_from(const Config& c);
CodecConfig codec_config_from(const Config& c);
DqnConfig dqn_config_from(const Config& c);

uint64_t params_hash(const std::vector<Tensor>& params);

// model checkpoints embed their architecture config, so loading needs no
// side channel
void save_model(const std::string& path, const ModelParams& p);
ModelParams load_model(const std::string& path);
void save_qnet(const std::string& path, const QNet& q, int budget, int gop, int hidden,
               int feat);
struct LoadedQNet {
    QNet net;
    int budget = 0;
};
LoadedQNet load_qnet(const std::string& path);

std::vector<VideoSequence> load_split(const DatasetManifest& m, Split s, int gop_size);

struct JsccTrainResult {
    int epochs_run = 0;
    double best_val = 0.0;
    std::vector<double> step_losses;  // in training order
};

// Joint training of both codecs and the flow estimator: each step samples
// groups with random crops, a fresh refinement level per frame, and one
// random SNR for the batch with the estimate matched to it. Throws on a
// non-finite loss, naming the offending batch seed.
JsccTrainResult train_jscc(ModelParams& p, const DatasetManifest& data,
                           const TrainConfig& tc, Metric objective, double power,
                           const std::string& out_dir);

struct AllocTrainResult {
    std::vector<double> episode_rewards;
    std::vector<double> episode_losses;
    double best_val = 0.0;  // best greedy validation reward seen
};

// Frozen-codec Q-learning over per-group allocations; one episode walks one
// training clip. Writes a per-episode CSV (episode, epsilon, reward, loss)
// and a validation CSV (episode, val_reward, lr). Every 50 episodes the
// greedy policy is scored on the validation clips under fixed noise; the
// checkpoint keeps the net with the best such score, the learning rate is
// cut after repeated misses, and a long dry spell stops training early.
AllocTrainResult train_allocator(const ModelParams& frozen, QNet& online,
                                 const DatasetManifest& data, const TrainConfig& tc,
                                 const DqnConfig& dc, Metric objective, double power,
                                 int budget, const std::string& out_dir);

struct SeqEvalResult {
    std::vector<Frame> originals;  // group frames only, bootstrap excluded
    std::vector<Frame> recons;
    double mean_reward = 0.0;  // mean per-group -log10(mean frame loss)
};

// Full sequence transmission: the bootstrap frame goes out as a key frame at
// the full block count, then each group under the policy's allocation
// (uniform when qnet is null), references chained through the emulated and
// received keys.
SeqEvalResult transmit_sequence(const ModelParams& p, const QNet* qnet,
                                const VideoSequence& seq, const ChannelModel& ch,
                                int budget, Metric objective, int msssim_levels,
                                Rng& chan_rng, Rng& emul_rng);

struct EvalRecord {
    double snr_test = 0.0;
    double snr_est = 0.0;
    std::string policy;  // "uniform" | "learned"
    std::string metric;  // "psnr" | "ms-ssim"
    double mean = 0.0;
    double std_dev = 0.0;
};

struct EvalOptions {
    std::vector<double> snr_grid;
    std::optional<double> snr_est;  // empty: matched to the test SNR
    std::vector<Metric> metrics = {Metric::psnr, Metric::ms_ssim};
    bool uniform = true;
    bool learned = false;
    double power = 1.0;
    int budget = 0;  // 0: all blocks
    int crop_h = 0, crop_w = 0;
    uint64_t seed = 1;
};

// One record per (test SNR, policy, metric); mean and population std are
// taken across the clips of the split. Never touches parameters.
std::vector<EvalRecord> evaluate_sweep(const ModelParams& p, const QNet* qnet,
                                       const DatasetManifest& data, Split split,
                                       const EvalOptions& opt);

void write_records_csv(const std::vector<EvalRecord>& recs, const std::string& path);
void write_sweep_svg(const std::vector<EvalRecord>& recs, Metric metric,
                     const std::string& path);
// records.csv plus one SVG per metric present, byte-stable across reruns
void emit_outputs(const std::vector<EvalRecord>& recs, const std::string& out_dir);

std::vector<double> snr_grid(double lo, double hi, double step);

}  // namespace wirevid
