#include "madpot/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "madpot/csvio.hpp"
#include "madpot/errors.hpp"

namespace madpot {

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto bad = [&](const std::string& what) { return ParseError("config: key '" + key + "': " + what); };
    try {
        if (key == "image_side") cfg.model.image_side = std::stoi(value);
        else if (key == "patch_side") cfg.model.patch_side = std::stoi(value);
        else if (key == "feat_dim") cfg.model.feat_dim = std::stoi(value);
        else if (key == "token_dim") cfg.model.token_dim = std::stoi(value);
        else if (key == "num_prompts") cfg.model.num_prompts = std::stoi(value);
        else if (key == "context_len") cfg.model.context_len = std::stoi(value);
        else if (key == "gamma") cfg.model.gamma = std::stod(value);
        else if (key == "encoder_seed") cfg.model.encoder_seed = std::stoull(value);
        else if (key == "tau") cfg.scoring.tau = std::stod(value);
        else if (key == "variant") cfg.scoring.variant = variant_from_string(value);
        else if (key == "vision") cfg.vision = vision_from_string(value);
        else if (key == "lambda") cfg.scoring.solver.lambda = std::stod(value);
        else if (key == "max_iter") cfg.scoring.solver.max_iter = std::stoi(value);
        else if (key == "early_stop_tol") cfg.scoring.solver.early_stop_tol = std::stod(value);
        else if (key == "frac") cfg.scoring.solver.frac = std::stod(value);
        else if (key == "lr") cfg.hyper.lr = std::stod(value);
        else if (key == "batch_size") cfg.hyper.batch_size = std::stoi(value);
        else if (key == "epochs") cfg.hyper.epochs = std::stoi(value);
        else if (key == "seed") cfg.hyper.seed = std::stoull(value);
        else if (key == "w_gdice") cfg.hyper.weights.w_gdice = std::stod(value);
        else if (key == "w_focal") cfg.hyper.weights.w_focal = std::stod(value);
        else if (key == "w_bce") cfg.hyper.weights.w_bce = std::stod(value);
        else if (key == "blur_passes") cfg.synth.blur_passes = std::stoi(value);
        else if (key == "blur_radius") cfg.synth.blur_radius = std::stoi(value);
        else if (key == "blob_count_min") cfg.synth.blob_count_min = std::stoi(value);
        else if (key == "blob_count_max") cfg.synth.blob_count_max = std::stoi(value);
        else if (key == "blob_radius_min") cfg.synth.blob_radius_min = std::stod(value);
        else if (key == "blob_radius_max") cfg.synth.blob_radius_max = std::stod(value);
        else if (key == "blob_intensity_min") cfg.synth.blob_intensity_min = std::stod(value);
        else if (key == "blob_intensity_max") cfg.synth.blob_intensity_max = std::stod(value);
        else if (key == "noise_amplitude") cfg.synth.noise_amplitude = std::stod(value);
        else throw bad("unknown key");
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw bad("malformed value '" + value + "'");
    }
    cfg.synth.image_side = cfg.model.image_side;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw ParseError("config: " + path.string() + " line " + std::to_string(line_no) +
                                 ": expected 'key = value'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError("config: " + path.string() + " line " + std::to_string(line_no) +
                             ": empty key or value");
        apply_config_value(cfg, key, value);
    }
    return cfg;
}

TrainConfig to_train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.hyper = cfg.hyper;
    t.scoring = cfg.scoring;
    t.model = cfg.model;
    t.vision = cfg.vision;
    return t;
}

TrainResult run_training(const RunConfig& cfg, const std::filesystem::path& manifest_path) {
    const std::vector<Sample> samples = load_samples(manifest_path);
    return train(samples, to_train_config(cfg));
}

namespace {

std::vector<std::pair<std::string, std::string>> config_echo(const ModelParams& p) {
    std::vector<std::pair<std::string, std::string>> e;
    e.emplace_back("image_side", std::to_string(p.config.image_side));
    e.emplace_back("patch_side", std::to_string(p.config.patch_side));
    e.emplace_back("feat_dim", std::to_string(p.config.feat_dim));
    e.emplace_back("token_dim", std::to_string(p.config.token_dim));
    e.emplace_back("num_prompts", std::to_string(p.config.num_prompts));
    e.emplace_back("context_len", std::to_string(p.config.context_len));
    e.emplace_back("gamma", format_double(p.config.gamma));
    e.emplace_back("encoder_seed", std::to_string(p.config.encoder_seed));
    e.emplace_back("vision", to_string(p.vision));
    e.emplace_back("variant", to_string(p.scoring.variant));
    e.emplace_back("tau", format_double(p.scoring.tau));
    e.emplace_back("lambda", format_double(p.scoring.solver.lambda));
    e.emplace_back("max_iter", std::to_string(p.scoring.solver.max_iter));
    e.emplace_back("early_stop_tol", format_double(p.scoring.solver.early_stop_tol));
    e.emplace_back("frac", format_double(p.scoring.solver.frac));
    e.emplace_back("lr", format_double(p.train_echo.lr));
    e.emplace_back("batch_size", std::to_string(p.train_echo.batch_size));
    e.emplace_back("epochs", std::to_string(p.train_echo.epochs));
    e.emplace_back("seed", std::to_string(p.train_echo.seed));
    return e;
}

}  // namespace

EvalReport run_eval(const ModelParams& params, const std::filesystem::path& manifest_path) {
    const Manifest manifest = read_manifest(manifest_path);
    const std::vector<Sample> samples = load_samples(manifest_path);
    const FrozenEncoder enc = make_encoder(params.config);

    EvalReport report;
    report.n_images = static_cast<int>(samples.size());
    report.variant = to_string(params.scoring.variant);
    report.vision = to_string(params.vision);
    report.config_echo = config_echo(params);

    std::vector<double> scores;
    std::vector<int> abnormal_labels;
    std::vector<Matrix> masked_maps, masks;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const SampleEvaluation ev = evaluate_sample(samples[i], params, enc);
        scores.push_back(ev.aggregate.ac_score);
        abnormal_labels.push_back(samples[i].label == 0 ? 1 : 0);
        PerImageScore ps;
        ps.image = manifest.records[i].image_path;
        ps.label = samples[i].label;
        ps.score = ev.aggregate.ac_score;
        report.per_image.push_back(std::move(ps));
        if (samples[i].mask.has_value()) {
            masked_maps.push_back(ev.aggregate.as_map);
            masks.push_back(*samples[i].mask);
        }
    }
    report.ac_auc = roc_auc(scores, abnormal_labels);
    if (!masked_maps.empty())
        report.as_auc = pixel_auc(masked_maps, masks, params.train_echo.seed);
    return report;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& epoch_losses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("loss csv: cannot open " + path.string());
    out << "epoch,mean_loss\n";
    for (std::size_t i = 0; i < epoch_losses.size(); ++i)
        out << (i + 1) << ',' << format_double(epoch_losses[i]) << '\n';
    if (!out) throw IoError("loss csv: write failed for " + path.string());
}

}  // namespace madpot
