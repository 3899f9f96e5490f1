#pragma once

#include <cstdint>
#include <vector>

#include "wirevid/codec.hpp"
#include "wirevid/metrics.hpp"

namespace wirevid {

// Allocates the per-group block budget across frames with a Q-network over
// the transmitter's view of the group: targets, emulated references under a
// uniform bootstrap allocation, and the warp residuals and flows.

using AllocAction = std::vector<int>;  // per-frame block counts, sums to the budget

// all compositions of budget into n non-negative parts, lexicographically
// ascending; count is C(budget + n - 1, n - 1)
std::vector<AllocAction> enumerate_actions(int n, int budget);
int64_t count_actions(int n, int budget);

// budget split evenly, floor per frame, remainder onto the key frame
AllocAction uniform_action(int n, int budget);

struct AllocState {
    std::vector<Tensor> frames;                      // x_1..x_N to be sent
    std::vector<Tensor> refs;                        // emulated x_0..x_N
    std::vector<Tensor> res_m, res_p;                // per interpolated frame,
    std::vector<Tensor> flow_m, flow_p;              //   schedule order
    Tensor recv_ref;                                 // receiver's previous key
    double sigma2_est = 1.0;

    Tensor q_input() const;  // (21(N-1)+6, H, W), inputs scaled like the codecs'
};

// Emulates the group under a uniform split of the spendable budget to
// populate the reference/residual/flow features the allocator decides from.
AllocState build_state(const ModelParams& p, const Tensor& prev_key_tx,
                       const Tensor& prev_key_rx, const std::vector<Tensor>& frames,
                       const ChannelModel& ch, int budget, Rng& emul_rng);

struct QNet {
    Encoder trunk;
    Dense head;
    int n_actions = 0;
    QNet() = default;
    QNet(int in_ch, int hidden, int feat, int n_actions_, Rng& rng);
    Tensor operator()(const Tensor& q_input, float snr_est_db) const;
    void collect(std::vector<Tensor>& out) const;
};

int select_action(const Tensor& q_values);  // argmax, ties to the lowest index

struct Transition {
    Tensor s;  // q_input stacks (values only)
    Tensor s2;
    float snr_est_db = 0.0f;
    int action = 0;
    float reward = 0.0f;
    bool terminal = false;
};

struct ReplayBuffer {
    size_t capacity = 1000;
    explicit ReplayBuffer(size_t cap) : capacity(cap) {}
    void push(Transition t);  // FIFO once full
    std::vector<const Transition*> sample(int n, Rng& rng) const;  // without replacement
    size_t size() const { return buf.size(); }

   private:
    std::vector<Transition> buf;
    size_t head = 0;
};

struct DqnConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double eps0 = 0.9;
    double eps_end = 0.05;
    double eps_lambda = 1000.0;
    int replay_capacity = 1000;
    int batch = 8;
};

double epsilon_schedule(const DqnConfig& c, int episode);

// mean squared TD error; the bootstrap target r + gamma * max_a q_target(s')
// is treated as a constant, and the max term is dropped on terminal steps
Tensor dqn_loss(const QNet& online, const QNet& target,
                const std::vector<const Transition*>& batch, double gamma);

void soft_update(const std::vector<Tensor>& target, const std::vector<Tensor>& online,
                 double tau);
void copy_values(const std::vector<Tensor>& dst, const std::vector<Tensor>& src);

struct StepResult {
    double reward = 0.0;                // -log10 of the mean frame loss
    std::vector<Tensor> receiver;       // reconstructions under the chosen action
    Tensor next_key_tx, next_key_rx;    // references for the next group
};

// Transmits the group under the chosen allocation. Frame loss is MSE for the
// psnr objective and 1 - MS-SSIM otherwise.
StepResult step_env(const ModelParams& p, const AllocState& s, const AllocAction& a,
                    const ChannelModel& ch, Metric objective, int msssim_levels,
                    Rng& chan_rng, Rng& emul_rng);

}  // namespace wirevid
