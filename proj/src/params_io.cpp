#include "madpot/params_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "madpot/csvio.hpp"
#include "madpot/errors.hpp"

namespace madpot {

namespace {

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "tensor " << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (c) out << ' ';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

}  // namespace

void save_params(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_params: cannot open " + path.string());
    out << "madpot-params\n";
    out << "version 1\n";
    out << "image_side " << params.config.image_side << '\n';
    out << "patch_side " << params.config.patch_side << '\n';
    out << "feat_dim " << params.config.feat_dim << '\n';
    out << "token_dim " << params.config.token_dim << '\n';
    out << "num_prompts " << params.config.num_prompts << '\n';
    out << "context_len " << params.config.context_len << '\n';
    out << "gamma " << format_double(params.config.gamma) << '\n';
    out << "encoder_seed " << params.config.encoder_seed << '\n';
    out << "vision " << to_string(params.vision) << '\n';
    out << "variant " << to_string(params.scoring.variant) << '\n';
    out << "tau " << format_double(params.scoring.tau) << '\n';
    out << "lambda " << format_double(params.scoring.solver.lambda) << '\n';
    out << "max_iter " << params.scoring.solver.max_iter << '\n';
    out << "early_stop_tol " << format_double(params.scoring.solver.early_stop_tol) << '\n';
    out << "frac " << format_double(params.scoring.solver.frac) << '\n';
    out << "lr " << format_double(params.train_echo.lr) << '\n';
    out << "batch_size " << params.train_echo.batch_size << '\n';
    out << "epochs " << params.train_echo.epochs << '\n';
    out << "seed " << params.train_echo.seed << '\n';
    out << "w_gdice " << format_double(params.train_echo.weights.w_gdice) << '\n';
    out << "w_focal " << format_double(params.train_echo.weights.w_focal) << '\n';
    out << "w_bce " << format_double(params.train_echo.weights.w_bce) << '\n';

    write_tensor(out, "prompts.normal", params.v_normal);
    write_tensor(out, "prompts.abnormal", params.v_abnormal);
    if (params.adapter) {
        write_tensor(out, "adapter1.shared", params.adapter->w_shared);
        write_tensor(out, "adapter1.det", params.adapter->w_det);
        write_tensor(out, "adapter1.seg", params.adapter->w_seg);
    }
    if (params.projector) {
        write_tensor(out, "projector2.shared", params.projector->w_shared);
        write_tensor(out, "projector2.det", params.projector->w_det);
        write_tensor(out, "projector2.seg", params.projector->w_seg);
    }
    if (!out) throw IoError("save_params: write failed for " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_params: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "madpot-params")
        throw ParseError("load_params: " + path.string() + " is not a madpot-params file");

    ModelParams p;
    std::map<std::string, Matrix> tensors;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        auto bad = [&](const std::string& what) {
            return ParseError("load_params: " + path.string() + " line " +
                              std::to_string(line_no) + ": " + what);
        };
        if (key == "tensor") {
            std::string name;
            int rows = 0, cols = 0;
            if (!(ss >> name >> rows >> cols) || rows < 1 || cols < 1)
                throw bad("malformed tensor header");
            Matrix m(rows, cols);
            for (int r = 0; r < rows; ++r) {
                if (!std::getline(in, line)) throw bad("truncated tensor " + name);
                ++line_no;
                std::istringstream row(line);
                for (int c = 0; c < cols; ++c)
                    if (!(row >> m(r, c))) throw bad("malformed tensor row in " + name);
            }
            tensors[name] = std::move(m);
            continue;
        }
        std::string value;
        if (!(ss >> value)) throw bad("missing value for key " + key);
        try {
            if (key == "version") {
                if (value != "1") throw bad("unsupported version " + value);
            } else if (key == "image_side") p.config.image_side = std::stoi(value);
            else if (key == "patch_side") p.config.patch_side = std::stoi(value);
            else if (key == "feat_dim") p.config.feat_dim = std::stoi(value);
            else if (key == "token_dim") p.config.token_dim = std::stoi(value);
            else if (key == "num_prompts") p.config.num_prompts = std::stoi(value);
            else if (key == "context_len") p.config.context_len = std::stoi(value);
            else if (key == "gamma") p.config.gamma = std::stod(value);
            else if (key == "encoder_seed") p.config.encoder_seed = std::stoull(value);
            else if (key == "vision") p.vision = vision_from_string(value);
            else if (key == "variant") p.scoring.variant = variant_from_string(value);
            else if (key == "tau") p.scoring.tau = std::stod(value);
            else if (key == "lambda") p.scoring.solver.lambda = std::stod(value);
            else if (key == "max_iter") p.scoring.solver.max_iter = std::stoi(value);
            else if (key == "early_stop_tol") p.scoring.solver.early_stop_tol = std::stod(value);
            else if (key == "frac") p.scoring.solver.frac = std::stod(value);
            else if (key == "lr") p.train_echo.lr = std::stod(value);
            else if (key == "batch_size") p.train_echo.batch_size = std::stoi(value);
            else if (key == "epochs") p.train_echo.epochs = std::stoi(value);
            else if (key == "seed") p.train_echo.seed = std::stoull(value);
            else if (key == "w_gdice") p.train_echo.weights.w_gdice = std::stod(value);
            else if (key == "w_focal") p.train_echo.weights.w_focal = std::stod(value);
            else if (key == "w_bce") p.train_echo.weights.w_bce = std::stod(value);
            else throw bad("unknown key " + key);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw bad("malformed value for key " + key);
        }
    }

    auto take = [&](const std::string& name, Matrix& dst, int rows, int cols) {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw ParseError("load_params: " + path.string() + ": missing tensor " + name);
        if (it->second.rows != rows || it->second.cols != cols)
            throw ParseError("load_params: " + path.string() + ": tensor " + name +
                             " has wrong shape");
        dst = std::move(it->second);
        tensors.erase(it);
    };

    p.config.validate();
    const int kl = p.config.num_prompts * p.config.context_len;
    take("prompts.normal", p.v_normal, kl, p.config.token_dim);
    take("prompts.abnormal", p.v_abnormal, kl, p.config.token_dim);
    const int d = p.config.feat_dim;
    if (p.vision == VisionMode::adapter || p.vision == VisionMode::both) {
        p.adapter.emplace();
        take("adapter1.shared", p.adapter->w_shared, d, d);
        take("adapter1.det", p.adapter->w_det, d, d);
        take("adapter1.seg", p.adapter->w_seg, d, d);
    }
    if (p.vision == VisionMode::projector || p.vision == VisionMode::both) {
        p.projector.emplace();
        take("projector2.shared", p.projector->w_shared, d, d);
        take("projector2.det", p.projector->w_det, d, d);
        take("projector2.seg", p.projector->w_seg, d, d);
    }
    if (!tensors.empty())
        throw ParseError("load_params: " + path.string() + ": unexpected tensor " +
                         tensors.begin()->first);
    return p;
}

}  // namespace madpot
