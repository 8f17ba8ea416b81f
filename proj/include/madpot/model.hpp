#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "madpot/matrix.hpp"

namespace madpot {

struct ModelConfig {
    int image_side = 64;
    int patch_side = 8;
    int feat_dim = 32;   // d
    int token_dim = 16;
    int num_prompts = 4;  // K
    int context_len = 8;  // L
    double gamma = 0.2;   // adapter residual ratio
    std::uint64_t encoder_seed = 42;

    int grid_side() const { return image_side / patch_side; }
    int grid_size() const { return grid_side() * grid_side(); }  // G
    void validate() const;
};

// Which vision-side blocks are trainable (ablation axis).
enum class VisionMode { none, adapter, projector, both };

const char* to_string(VisionMode m);
VisionMode vision_from_string(const std::string& s);

// Frozen two-level patch encoder standing in for a pretrained backbone. All
// weights derive from encoder_seed and never train.
struct FrozenEncoder {
    Matrix w1;                  // patch_side^2 x d
    Matrix w2;                  // d x d
    std::array<double, 9> mix;  // 3x3 neighbor-averaging stencil, sums to 1
    Matrix w_txt;               // token_dim x d text-side map
};

FrozenEncoder make_encoder(const ModelConfig& cfg);

// Shared/det/seg transformation triple of one level.
struct LevelParams {
    Matrix w_shared, w_det, w_seg;  // each d x d, no biases
};

struct AdapterOut {
    Matrix o_det, o_seg;
    std::optional<Matrix> f_res;  // residual blend; level-1 adapter only
};

// F_shared = ReLU(f W_shared); heads ReLU(F_shared W_det/W_seg);
// residual form adds F_res = gamma*F_shared + (1-gamma)*f.
AdapterOut adapter_apply(const Matrix& f, const LevelParams& params, double gamma, bool residual);

// Image (image_side^2, values in [0,1]) to G x patch_side^2 rows, patches and
// pixels both in row-major order.
Matrix patchify(const Matrix& image, const ModelConfig& cfg);

// tanh(patches W1).
Matrix encode_level1(const Matrix& patches, const FrozenEncoder& enc);

// 3x3 stencil mix over the grid (edge-clamped), then tanh(mixed W2).
Matrix encode_level2(const Matrix& f_res, const FrozenEncoder& enc, int grid_side);

// Learnable context tokens plus frozen class-name tokens for one class.
struct PromptTokens {
    Matrix v;                 // (K*L) x token_dim, learnable
    std::vector<Matrix> cls;  // K frozen 1 x token_dim class-name tokens
};

struct PromptSet {
    Matrix p;      // K x d, rows L2-normalized
    Matrix fused;  // 1 x d, arithmetic mean of the K rows
};

// prompt_k = normalize(tanh(mean(v_1..v_L, cls_k) W_txt)).
PromptSet encode_prompts(const PromptTokens& tokens, const FrozenEncoder& enc, int num_prompts,
                         int context_len);

const std::vector<std::string>& normal_class_names();
const std::vector<std::string>& abnormal_class_names();

std::uint64_t fnv1a64(const std::string& s);

// Frozen class-name token: FNV-1a of the name seeds a splitmix64 stream of
// uniform [-1, 1] entries.
Matrix class_token(const std::string& name, int token_dim);
std::vector<Matrix> class_tokens(const std::vector<std::string>& names, int num_prompts,
                                 int token_dim);

}  // namespace madpot
