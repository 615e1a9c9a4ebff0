#include "atlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "atlab/checkpoint.hpp"
#include "atlab/rng.hpp"

namespace fs = std::filesystem;

namespace atlab {

namespace {

// Collects every problem before failing, so one run reports all bad fields.
class Check {
public:
    void error(const std::string& path, const std::string& msg) {
        errors_.push_back(path + ": " + msg);
    }

    void reject_unknown(const nlohmann::json& j, const std::string& path,
                        std::initializer_list<const char*> allowed) {
        if (!j.is_object()) return;
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for (const char* k : allowed) {
                if (it.key() == k) {
                    known = true;
                    break;
                }
            }
            if (!known) error(path + "." + it.key(), "unknown field");
        }
    }

    bool object(const nlohmann::json& j, const std::string& path) {
        if (j.is_object()) return true;
        error(path, "expected an object");
        return false;
    }

    double num(const nlohmann::json& j, const std::string& path, const char* key, double fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number()) {
            error(path + "." + key, "expected a number");
            return fallback;
        }
        return j.at(key).get<double>();
    }

    std::int64_t integer(const nlohmann::json& j, const std::string& path, const char* key,
                         std::int64_t fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number_integer()) {
            error(path + "." + key, "expected an integer");
            return fallback;
        }
        return j.at(key).get<std::int64_t>();
    }

    std::uint64_t uinteger(const nlohmann::json& j, const std::string& path, const char* key,
                           std::uint64_t fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer()) {
            error(path + "." + key, "expected a non-negative integer");
            return fallback;
        }
        if (j.at(key).is_number_integer() && j.at(key).get<std::int64_t>() < 0) {
            error(path + "." + key, "expected a non-negative integer");
            return fallback;
        }
        return j.at(key).get<std::uint64_t>();
    }

    bool boolean(const nlohmann::json& j, const std::string& path, const char* key, bool fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_boolean()) {
            error(path + "." + key, "expected a boolean");
            return fallback;
        }
        return j.at(key).get<bool>();
    }

    std::string str(const nlohmann::json& j, const std::string& path, const char* key,
                    const std::string& fallback, bool required = false) {
        if (!j.contains(key)) {
            if (required) error(path + "." + key, "required field is missing");
            return fallback;
        }
        if (!j.at(key).is_string()) {
            error(path + "." + key, "expected a string");
            return fallback;
        }
        return j.at(key).get<std::string>();
    }

    void finish() {
        if (errors_.empty()) return;
        std::string msg = "invalid config:";
        for (const std::string& e : errors_) msg += "\n  " + e;
        throw ConfigError(msg);
    }

    bool ok() const { return errors_.empty(); }

private:
    std::vector<std::string> errors_;
};

AttackSpec parse_attack(Check& c, const nlohmann::json& j, const std::string& path) {
    AttackSpec spec;
    if (!c.object(j, path)) return spec;
    c.reject_unknown(j, path,
                     {"name", "family", "epsilon", "step_size", "steps", "mim_decay", "random_start",
                      "cw_kappa"});
    const std::string fam = c.str(j, path, "family", "pgd");
    try {
        spec.family = family_from_str(fam);
    } catch (const ConfigError& e) {
        c.error(path + ".family", e.what());
    }
    spec.epsilon = c.num(j, path, "epsilon", spec.epsilon);
    if (spec.family == AttackFamily::kFgsm) {
        spec.steps = static_cast<int>(c.integer(j, path, "steps", 1));
        spec.step_size = c.num(j, path, "step_size", spec.epsilon);
    } else {
        spec.steps = static_cast<int>(c.integer(j, path, "steps", spec.steps));
        spec.step_size = c.num(j, path, "step_size", spec.step_size);
    }
    spec.mim_decay = c.num(j, path, "mim_decay", spec.mim_decay);
    spec.random_start = c.boolean(j, path, "random_start", spec.random_start);
    spec.cw_kappa = c.num(j, path, "cw_kappa", spec.cw_kappa);
    spec.name = c.str(j, path, "name", "");
    return spec;
}

LossSpec parse_loss(Check& c, const nlohmann::json& j, const std::string& path) {
    LossSpec spec;
    if (!c.object(j, path)) return spec;
    c.reject_unknown(j, path, {"kind", "beta", "mu"});
    const std::string kind = c.str(j, path, "kind", "at_ce");
    try {
        spec.kind = loss_kind_from_str(kind);
    } catch (const ConfigError& e) {
        c.error(path + ".kind", e.what());
    }
    spec.beta = c.num(j, path, "beta", spec.beta);
    spec.mu = c.num(j, path, "mu", spec.mu);
    return spec;
}

LambdaSchedule parse_lambda(Check& c, const nlohmann::json& j, const std::string& path) {
    LambdaSchedule s;
    if (!c.object(j, path)) return s;
    c.reject_unknown(j, path, {"kind", "fixed_value", "c", "epoch_base"});
    const std::string kind = c.str(j, path, "kind", "dynamic");
    try {
        s.kind = lambda_kind_from_str(kind);
    } catch (const ConfigError& e) {
        c.error(path + ".kind", e.what());
    }
    s.fixed_value = c.num(j, path, "fixed_value", s.fixed_value);
    s.c = c.num(j, path, "c", s.c);
    s.epoch_base = static_cast<int>(c.integer(j, path, "epoch_base", s.epoch_base));
    return s;
}

LrSchedule parse_lr(Check& c, const nlohmann::json& j, const std::string& path) {
    LrSchedule s;
    s.milestones = {{15, 0.01}, {22, 0.001}, {30, 0.0001}};
    if (!c.object(j, path)) return s;
    c.reject_unknown(j, path, {"initial", "milestones"});
    s.initial = c.num(j, path, "initial", s.initial);
    if (j.contains("milestones")) {
        if (!j.at("milestones").is_array()) {
            c.error(path + ".milestones", "expected an array of [epoch, value] pairs");
        } else {
            s.milestones.clear();
            std::size_t i = 0;
            for (const auto& item : j.at("milestones")) {
                const std::string ipath = path + ".milestones[" + std::to_string(i++) + "]";
                if (!item.is_array() || item.size() != 2 || !item[0].is_number_integer() ||
                    !item[1].is_number()) {
                    c.error(ipath, "expected [epoch, value]");
                    continue;
                }
                s.milestones.emplace_back(item[0].get<int>(), item[1].get<double>());
            }
        }
    }
    return s;
}

DatasetConfig parse_dataset(Check& c, const nlohmann::json& j, const std::string& path) {
    DatasetConfig d;
    if (!c.object(j, path)) return d;
    d.kind = c.str(j, path, "kind", "two_moons");
    if (d.kind == "two_moons") {
        c.reject_unknown(j, path, {"kind", "train_n", "test_n", "noise_sd"});
        d.train_n = c.uinteger(j, path, "train_n", d.train_n);
        d.test_n = c.uinteger(j, path, "test_n", d.test_n);
        d.noise_sd = c.num(j, path, "noise_sd", d.noise_sd);
    } else if (d.kind == "blobs") {
        c.reject_unknown(j, path, {"kind", "train_n", "test_n", "spread_sd", "centers"});
        d.train_n = c.uinteger(j, path, "train_n", d.train_n);
        d.test_n = c.uinteger(j, path, "test_n", d.test_n);
        d.spread_sd = c.num(j, path, "spread_sd", d.spread_sd);
        if (!j.contains("centers") || !j.at("centers").is_array()) {
            c.error(path + ".centers", "required array of points");
        } else {
            std::size_t i = 0;
            for (const auto& pt : j.at("centers")) {
                const std::string ipath = path + ".centers[" + std::to_string(i++) + "]";
                if (!pt.is_array() || pt.empty()) {
                    c.error(ipath, "expected a coordinate array");
                    continue;
                }
                std::vector<double> coords;
                for (const auto& v : pt) {
                    if (!v.is_number()) {
                        c.error(ipath, "coordinates must be numbers");
                        break;
                    }
                    coords.push_back(v.get<double>());
                }
                d.centers.push_back(std::move(coords));
            }
        }
    } else if (d.kind == "idx") {
        c.reject_unknown(j, path,
                         {"kind", "train_images", "train_labels", "test_images", "test_labels",
                          "limit", "test_limit", "classes"});
        d.train_images = c.str(j, path, "train_images", "", true);
        d.train_labels = c.str(j, path, "train_labels", "", true);
        d.test_images = c.str(j, path, "test_images", "", true);
        d.test_labels = c.str(j, path, "test_labels", "", true);
        d.limit = c.uinteger(j, path, "limit", d.limit);
        d.test_limit = c.uinteger(j, path, "test_limit", d.test_limit);
        d.classes = static_cast<int>(c.integer(j, path, "classes", d.classes));
    } else {
        c.error(path + ".kind", "unknown dataset kind '" + d.kind + "'");
    }
    return d;
}

std::string resolved_attack_name(const AttackSpec& spec) {
    return spec.name.empty() ? default_attack_name(spec) : spec.name;
}

void check_idx_files(Check& c, const DatasetConfig& d) {
    struct Entry {
        const char* field;
        const std::string& path;
        bool images;
    };
    const Entry entries[] = {{"dataset.train_images", d.train_images, true},
                             {"dataset.train_labels", d.train_labels, false},
                             {"dataset.test_images", d.test_images, true},
                             {"dataset.test_labels", d.test_labels, false}};
    for (const Entry& e : entries) {
        if (e.path.empty()) continue;
        try {
            const IdxHeader h = read_idx_header(e.path);
            const bool is_images = h.magic == 0x00000803;
            if (is_images != e.images) {
                c.error(e.field, "wrong idx kind (images/labels swapped?): " + e.path);
            }
        } catch (const std::exception& ex) {
            c.error(e.field, ex.what());
        }
    }
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    Check c;
    RunConfig cfg;
    if (!j.is_object()) throw ConfigError("invalid config:\n  root: expected an object");
    c.reject_unknown(j, "$",
                     {"schema_version", "seed", "out_dir", "dataset", "model", "train",
                      "eval_attacks", "epoch_eval_attacks", "snapshots"});

    cfg.schema_version = static_cast<int>(c.integer(j, "$", "schema_version", 0));
    if (cfg.schema_version != 1) c.error("$.schema_version", "must be 1");
    cfg.seed = c.uinteger(j, "$", "seed", cfg.seed);
    cfg.out_dir = c.str(j, "$", "out_dir", "");
    cfg.snapshots = c.boolean(j, "$", "snapshots", false);

    if (j.contains("dataset")) {
        cfg.dataset = parse_dataset(c, j.at("dataset"), "$.dataset");
    } else {
        c.error("$.dataset", "required field is missing");
    }

    if (j.contains("model")) {
        const auto& jm = j.at("model");
        if (c.object(jm, "$.model")) {
            c.reject_unknown(jm, "$.model", {"hidden"});
            if (jm.contains("hidden")) {
                if (!jm.at("hidden").is_array()) {
                    c.error("$.model.hidden", "expected an array of widths");
                } else {
                    cfg.hidden.clear();
                    for (const auto& w : jm.at("hidden")) {
                        if (!w.is_number_integer() || w.get<std::int64_t>() < 1) {
                            c.error("$.model.hidden", "widths must be positive integers");
                            break;
                        }
                        cfg.hidden.push_back(w.get<std::size_t>());
                    }
                }
            }
        }
    }

    if (j.contains("train")) {
        const auto& jt = j.at("train");
        if (c.object(jt, "$.train")) {
            c.reject_unknown(jt, "$.train",
                             {"warmup_epochs", "adv_epochs", "batch_size", "lr", "momentum",
                              "weight_decay", "momentum_mode", "attack", "loss", "lambda"});
            cfg.train.warmup_epochs =
                static_cast<int>(c.integer(jt, "$.train", "warmup_epochs", cfg.train.warmup_epochs));
            cfg.train.adv_epochs =
                static_cast<int>(c.integer(jt, "$.train", "adv_epochs", cfg.train.adv_epochs));
            cfg.train.batch_size = c.uinteger(jt, "$.train", "batch_size", cfg.train.batch_size);
            cfg.train.momentum = c.num(jt, "$.train", "momentum", cfg.train.momentum);
            cfg.train.weight_decay = c.num(jt, "$.train", "weight_decay", cfg.train.weight_decay);
            const std::string mode = c.str(jt, "$.train", "momentum_mode", "persist");
            if (mode == "persist") {
                cfg.train.momentum_mode = MomentumMode::kPersist;
            } else if (mode == "reset") {
                cfg.train.momentum_mode = MomentumMode::kReset;
            } else {
                c.error("$.train.momentum_mode", "expected 'persist' or 'reset'");
            }
            cfg.train.lr = jt.contains("lr") ? parse_lr(c, jt.at("lr"), "$.train.lr") : parse_lr(c, nlohmann::json::object(), "$.train.lr");
            if (jt.contains("attack")) {
                cfg.train.train_attack = parse_attack(c, jt.at("attack"), "$.train.attack");
            } else {
                cfg.train.train_attack.epsilon = 0.1;
                cfg.train.train_attack.step_size = 0.025;
                cfg.train.train_attack.steps = 10;
                cfg.train.train_attack.random_start = true;
            }
            if (jt.contains("loss")) cfg.train.loss = parse_loss(c, jt.at("loss"), "$.train.loss");
            if (jt.contains("lambda")) {
                cfg.train.lambda = parse_lambda(c, jt.at("lambda"), "$.train.lambda");
            }
        }
    } else {
        cfg.train.train_attack.epsilon = 0.1;
        cfg.train.train_attack.step_size = 0.025;
        cfg.train.train_attack.steps = 10;
        cfg.train.train_attack.random_start = true;
        cfg.train.lr = parse_lr(c, nlohmann::json::object(), "$.train.lr");
    }
    cfg.train.seed = cfg.seed;

    if (j.contains("eval_attacks")) {
        if (!j.at("eval_attacks").is_array()) {
            c.error("$.eval_attacks", "expected an array");
        } else {
            std::size_t i = 0;
            for (const auto& ja : j.at("eval_attacks")) {
                cfg.eval_attacks.push_back(
                    parse_attack(c, ja, "$.eval_attacks[" + std::to_string(i++) + "]"));
            }
        }
    } else {
        AttackSpec pgd20 = cfg.train.train_attack;
        pgd20.family = AttackFamily::kPgd;
        pgd20.steps = 20;
        pgd20.random_start = false;
        pgd20.name = "pgd20";
        cfg.eval_attacks.push_back(pgd20);
    }

    if (j.contains("epoch_eval_attacks")) {
        if (!j.at("epoch_eval_attacks").is_array()) {
            c.error("$.epoch_eval_attacks", "expected an array of attack names");
        } else {
            for (const auto& n : j.at("epoch_eval_attacks")) {
                if (!n.is_string()) {
                    c.error("$.epoch_eval_attacks", "entries must be strings");
                    break;
                }
                cfg.epoch_eval_attacks.push_back(n.get<std::string>());
            }
        }
    }

    // semantic checks, once the structure parsed cleanly enough
    if (c.ok()) {
        try {
            validate(cfg.train);
        } catch (const std::exception& e) {
            c.error("$.train", e.what());
        }
        std::vector<std::string> names;
        for (std::size_t i = 0; i < cfg.eval_attacks.size(); ++i) {
            try {
                validate(cfg.eval_attacks[i]);
            } catch (const std::exception& e) {
                c.error("$.eval_attacks[" + std::to_string(i) + "]", e.what());
            }
            const std::string name = resolved_attack_name(cfg.eval_attacks[i]);
            if (std::find(names.begin(), names.end(), name) != names.end()) {
                c.error("$.eval_attacks[" + std::to_string(i) + "]", "duplicate attack name '" + name + "'");
            }
            names.push_back(name);
        }
        for (const std::string& n : cfg.epoch_eval_attacks) {
            if (std::find(names.begin(), names.end(), n) == names.end()) {
                c.error("$.epoch_eval_attacks", "no eval attack named '" + n + "'");
            }
        }
        if (cfg.dataset.kind == "two_moons") {
            if (cfg.dataset.train_n < 2 || cfg.dataset.train_n % 2 != 0) {
                c.error("$.dataset.train_n", "must be even and >= 2");
            }
            if (cfg.dataset.test_n < 2 || cfg.dataset.test_n % 2 != 0) {
                c.error("$.dataset.test_n", "must be even and >= 2");
            }
            if (cfg.dataset.noise_sd < 0) c.error("$.dataset.noise_sd", "must be >= 0");
        } else if (cfg.dataset.kind == "blobs") {
            if (cfg.dataset.centers.size() < 2) c.error("$.dataset.centers", "needs at least 2 centers");
        } else if (cfg.dataset.kind == "idx") {
            if (cfg.dataset.classes < 2) c.error("$.dataset.classes", "must be >= 2");
            check_idx_files(c, cfg.dataset);
        }
    }
    c.finish();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid config:\n  " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["snapshots"] = cfg.snapshots;

    nlohmann::json jd;
    jd["kind"] = cfg.dataset.kind;
    if (cfg.dataset.kind == "two_moons") {
        jd["train_n"] = cfg.dataset.train_n;
        jd["test_n"] = cfg.dataset.test_n;
        jd["noise_sd"] = cfg.dataset.noise_sd;
    } else if (cfg.dataset.kind == "blobs") {
        jd["train_n"] = cfg.dataset.train_n;
        jd["test_n"] = cfg.dataset.test_n;
        jd["spread_sd"] = cfg.dataset.spread_sd;
        jd["centers"] = cfg.dataset.centers;
    } else {
        jd["train_images"] = cfg.dataset.train_images;
        jd["train_labels"] = cfg.dataset.train_labels;
        jd["test_images"] = cfg.dataset.test_images;
        jd["test_labels"] = cfg.dataset.test_labels;
        jd["limit"] = cfg.dataset.limit;
        jd["test_limit"] = cfg.dataset.test_limit;
        jd["classes"] = cfg.dataset.classes;
    }
    j["dataset"] = jd;
    j["model"] = {{"hidden", cfg.hidden}};

    auto attack_json = [](const AttackSpec& a) {
        nlohmann::json ja;
        ja["name"] = resolved_attack_name(a);
        ja["family"] = family_str(a.family);
        ja["epsilon"] = a.epsilon;
        ja["step_size"] = a.step_size;
        ja["steps"] = a.steps;
        ja["mim_decay"] = a.mim_decay;
        ja["random_start"] = a.random_start;
        ja["cw_kappa"] = a.cw_kappa;
        return ja;
    };

    nlohmann::json jt;
    jt["warmup_epochs"] = cfg.train.warmup_epochs;
    jt["adv_epochs"] = cfg.train.adv_epochs;
    jt["batch_size"] = cfg.train.batch_size;
    jt["momentum"] = cfg.train.momentum;
    jt["weight_decay"] = cfg.train.weight_decay;
    jt["momentum_mode"] = cfg.train.momentum_mode == MomentumMode::kPersist ? "persist" : "reset";
    nlohmann::json jlr;
    jlr["initial"] = cfg.train.lr.initial;
    jlr["milestones"] = nlohmann::json::array();
    for (const auto& [e, v] : cfg.train.lr.milestones) jlr["milestones"].push_back({e, v});
    jt["lr"] = jlr;
    jt["attack"] = attack_json(cfg.train.train_attack);
    jt["loss"] = {{"kind", loss_kind_str(cfg.train.loss.kind)},
                  {"beta", cfg.train.loss.beta},
                  {"mu", cfg.train.loss.mu}};
    jt["lambda"] = {{"kind", lambda_kind_str(cfg.train.lambda.kind)},
                    {"fixed_value", cfg.train.lambda.fixed_value},
                    {"c", cfg.train.lambda.c},
                    {"epoch_base", cfg.train.lambda.epoch_base}};
    j["train"] = jt;

    j["eval_attacks"] = nlohmann::json::array();
    for (const AttackSpec& a : cfg.eval_attacks) j["eval_attacks"].push_back(attack_json(a));
    j["epoch_eval_attacks"] = cfg.epoch_eval_attacks;
    return j;
}

std::pair<Dataset, Dataset> build_datasets(const RunConfig& cfg) {
    const std::uint64_t train_seed = derive_seed(cfg.seed, stream::kData, 1);
    const std::uint64_t test_seed = derive_seed(cfg.seed, stream::kData, 2);
    if (cfg.dataset.kind == "two_moons") {
        return {make_two_moons(cfg.dataset.train_n, cfg.dataset.noise_sd, train_seed),
                make_two_moons(cfg.dataset.test_n, cfg.dataset.noise_sd, test_seed)};
    }
    if (cfg.dataset.kind == "blobs") {
        return {make_blobs(cfg.dataset.train_n, cfg.dataset.centers, cfg.dataset.spread_sd, train_seed),
                make_blobs(cfg.dataset.test_n, cfg.dataset.centers, cfg.dataset.spread_sd, test_seed)};
    }
    Dataset train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels, cfg.dataset.limit);
    Dataset test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels, cfg.dataset.test_limit);
    train.classes = std::max(train.classes, cfg.dataset.classes);
    test.classes = train.classes;
    validate_dataset(train);
    validate_dataset(test);
    return {std::move(train), std::move(test)};
}

MlpSpec derive_model_spec(const RunConfig& cfg) {
    MlpSpec spec;
    spec.hidden = cfg.hidden;
    if (cfg.dataset.kind == "two_moons") {
        spec.input_dim = 2;
        spec.classes = 2;
    } else if (cfg.dataset.kind == "blobs") {
        spec.input_dim = cfg.dataset.centers.empty() ? 2 : cfg.dataset.centers[0].size();
        spec.classes = cfg.dataset.centers.size();
    } else {
        const IdxHeader h = read_idx_header(cfg.dataset.train_images);
        spec.input_dim = h.rows * h.cols;
        spec.classes = static_cast<std::size_t>(cfg.dataset.classes);
    }
    return spec;
}

namespace {

std::vector<AttackSpec> resolve_epoch_eval(const RunConfig& cfg) {
    if (cfg.epoch_eval_attacks.empty()) return cfg.eval_attacks;
    std::vector<AttackSpec> out;
    for (const std::string& name : cfg.epoch_eval_attacks) {
        for (const AttackSpec& a : cfg.eval_attacks) {
            if (resolved_attack_name(a) == name) {
                out.push_back(a);
                break;
            }
        }
    }
    return out;
}

nlohmann::json record_json(const EpochRecord& rec) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["phase"] = rec.phase;
    j["adv_epoch"] = rec.adv_epoch;
    j["lambda"] = rec.lambda;
    j["train_loss"] = rec.train_loss;
    j["clean_acc"] = rec.clean_acc;
    nlohmann::json jr = nlohmann::json::object();
    for (const auto& [name, acc] : rec.robust_acc) jr[name] = acc;
    j["robust_acc"] = jr;
    return j;
}

}  // namespace

TrainArtifacts run_training(const RunConfig& cfg, std::ostream* progress) {
    if (cfg.out_dir.empty()) throw ConfigError("invalid config:\n  $.out_dir: required for training");
    const fs::path out(cfg.out_dir);
    if (fs::exists(out)) {
        if (!fs::is_directory(out)) {
            throw ConfigError("out_dir: exists and is not a directory: " + cfg.out_dir);
        }
        if (!fs::is_empty(out)) {
            throw ConfigError("out_dir: refusing to write into non-empty directory: " + cfg.out_dir);
        }
    } else {
        fs::create_directories(out);
    }

    const auto [train_data, test_data] = build_datasets(cfg);
    Mlp model = Mlp::build(derive_model_spec(cfg), cfg.seed);
    const TrainPlan& plan = cfg.train;
    const std::vector<AttackSpec> epoch_specs = resolve_epoch_eval(cfg);
    const int total_epochs = plan.warmup_epochs + plan.adv_epochs;

    TrainArtifacts art;
    art.out_dir = out;
    art.metrics_path = out / "metrics.jsonl";
    art.checkpoint_path = out / "final.ckpt";
    art.resolved_config_path = out / "resolved_config.json";
    if (cfg.snapshots) fs::create_directories(out / "snapshots");

    std::ofstream metrics(art.metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot open metrics file: " + art.metrics_path.string());

    SgdState state(model.param_count());
    PiatCallbacks cb;
    cb.clean_step = [&](Mlp& m, int epoch, std::uint64_t seed) {
        return clean_epoch(m, train_data, plan, epoch, seed, state);
    };
    cb.adv_step = [&](Mlp& m, int epoch, std::uint64_t seed) {
        if (plan.momentum_mode == MomentumMode::kReset) {
            std::fill(state.velocity.begin(), state.velocity.end(), 0.0);
        }
        return adv_epoch(m, train_data, plan, epoch, seed, state);
    };
    cb.evaluate = [&](const Mlp& m) {
        const EvalResult r = evaluate(m, test_data, epoch_specs, derive_seed(cfg.seed, stream::kEval));
        return PiatEval{r.clean_acc, r.robust};
    };
    cb.on_epoch_end = [&](const EpochRecord& rec, const Mlp& m) {
        metrics << record_json(rec).dump() << "\n";
        metrics.flush();
        if (cfg.snapshots) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", rec.epoch);
            save_checkpoint((out / "snapshots" / name).string(), m);
        }
        if (progress) {
            char line[256];
            std::string robust;
            for (const auto& [n, acc] : rec.robust_acc) {
                char r[64];
                std::snprintf(r, sizeof(r), " %s=%.4f", n.c_str(), acc);
                robust += r;
            }
            std::snprintf(line, sizeof(line), "epoch %d/%d [%s] lambda=%.4f loss=%.4f clean=%.4f%s (%.2fs)",
                          rec.epoch, total_epochs, rec.phase.c_str(), rec.lambda, rec.train_loss,
                          rec.clean_acc, robust.c_str(), rec.seconds);
            *progress << line << "\n";
        }
    };

    art.result = run_piat(model, plan.warmup_epochs, plan.adv_epochs, plan.lambda, cfg.seed, cb);

    save_checkpoint(art.checkpoint_path.string(), model);
    std::ofstream resolved(art.resolved_config_path, std::ios::trunc);
    resolved << to_json(cfg).dump(2) << "\n";
    if (!resolved) throw IoError("cannot write resolved config");
    return art;
}

EvalResult run_evaluation(const Mlp& model, const RunConfig& cfg) {
    const MlpSpec expect = derive_model_spec(cfg);
    if (!(model.spec() == expect)) {
        throw LayoutError("eval: checkpoint layer spec does not match the config's model/dataset");
    }
    const auto [train_data, test_data] = build_datasets(cfg);
    (void)train_data;
    return evaluate(model, test_data, cfg.eval_attacks, derive_seed(cfg.seed, stream::kEval));
}

void write_eval_json(const EvalResult& r, const std::string& path) {
    nlohmann::json j;
    j["clean_acc"] = r.clean_acc;
    j["clean_loss"] = r.clean_loss;
    nlohmann::json jr = nlohmann::json::object();
    for (const auto& [name, acc] : r.robust) jr[name] = acc;
    j["robust_acc"] = jr;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << j.dump(2) << "\n";
}

void write_eval_csv(const EvalResult& r, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    char buf[96];
    os << "attack,accuracy\n";
    std::snprintf(buf, sizeof(buf), "clean,%.17g\n", r.clean_acc);
    os << buf;
    for (const auto& [name, acc] : r.robust) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g\n", name.c_str(), acc);
        os << buf;
    }
}

LandscapeGrid run_landscape(Mlp& model, const RunConfig& cfg, int grid_n, std::uint64_t seed,
                            const std::string& mode) {
    const MlpSpec expect = derive_model_spec(cfg);
    if (!(model.spec() == expect)) {
        throw LayoutError("landscape: checkpoint layer spec does not match the config's model/dataset");
    }
    if (mode != "clean" && mode != "adversarial") {
        throw ConfigError("landscape: mode must be 'clean' or 'adversarial'");
    }
    const auto [train_data, test_data] = build_datasets(cfg);
    (void)train_data;
    auto [u, v] = sample_directions(model.layout(), seed);
    const auto loss_fn = mode == "clean"
                             ? clean_ce_loss_fn(test_data)
                             : adversarial_ce_loss_fn(test_data, cfg.train.train_attack,
                                                      derive_seed(seed, stream::kEval));
    LandscapeGrid grid = probe(model, u, v, grid_n, loss_fn);
    grid.direction_seed = seed;
    grid.mode = mode;
    return grid;
}

double population_sd(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size()));
}

RunSummary summarize_metrics(const std::string& path, int window, const std::string& attack_name) {
    if (window < 1) throw ConfigError("compare: window must be >= 1");
    std::ifstream is(path);
    if (!is) throw IoError("compare: cannot open: " + path);

    RunSummary s;
    s.file = path;
    std::vector<double> robust;  // adversarial epochs, in order
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        if (!j.is_object() || !j.contains("phase") || !j.contains("robust_acc") ||
            !j.at("robust_acc").is_object()) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": malformed record: missing fields");
        }
        if (j.at("phase").get<std::string>() != "adv") continue;
        const auto& jr = j.at("robust_acc");
        std::string key = attack_name;
        if (key.empty()) {
            if (jr.empty()) {
                throw FormatError(path + ":" + std::to_string(line_no) + ": record has no robust accuracies");
            }
            key = jr.begin().key();
        }
        if (!jr.contains(key) || !jr.at(key).is_number()) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": no robust accuracy for attack '" +
                              key + "'");
        }
        if (s.attack.empty()) s.attack = key;
        robust.push_back(jr.at(key).get<double>());
    }
    if (robust.empty()) throw FormatError(path + ": no adversarial-epoch records");

    s.adv_epochs = robust.size();
    s.final_robust = robust.back();
    s.best_robust = robust[0];
    s.best_epoch = 1;
    for (std::size_t i = 1; i < robust.size(); ++i) {
        if (robust[i] > s.best_robust) {
            s.best_robust = robust[i];
            s.best_epoch = static_cast<int>(i) + 1;
        }
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), robust.size());
    s.oscillation = population_sd(std::vector<double>(robust.begin(), robust.begin() + static_cast<std::ptrdiff_t>(w)));
    return s;
}

}  // namespace atlab
