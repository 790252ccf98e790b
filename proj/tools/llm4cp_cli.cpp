// SPDX-License-Identifier: Apache-2.0
//
// llm4cp - channel prediction benchmark toolkit
// Copyright (C) 2026 The llm4cp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// llm4cp command line: generate | train | evaluate | report

#include "llm4cp/llm4cp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace llm4cp;

namespace {

enum Exit : int {
    kOk = 0,
    kUnexpected = 1,
    kConfig = 2,
    kIo = 3,
    kNumeric = 4,
    kIncomplete = 5,
};

struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Context {
    std::string command;
    config::RunConfig cfg;
    std::uint64_t hash = 0;
    std::vector<std::string> written;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(Context& ctx, const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text))
        throw IoError("cannot write '" + path + "'");
    ctx.written.push_back(path);
}

std::string stamp(const Context& ctx)
{
    return "# config_hash " + hex64(ctx.hash) + " seed " + std::to_string(ctx.cfg.seed) + "\n";
}

void make_dir(const std::string& d)
{
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec)
        throw IoError("cannot create directory '" + d + "': " + ec.message());
}

// <out>/manifest.tsv: one line per artifact (path, bytes, fnv1a of the
// contents), merged across commands that share an output root.
void write_manifest(const Context& ctx)
{
    const std::string path = ctx.cfg.out + "/manifest.tsv";
    std::map<std::string, std::string> entries;
    std::map<std::string, std::string> runs;
    if (fs::exists(path)) {
        std::istringstream is(read_file(path));
        std::string line;
        while (std::getline(is, line)) {
            if (line.rfind("# run ", 0) == 0) {
                std::istringstream ls(line.substr(6));
                std::string cmd;
                ls >> cmd;
                runs[cmd] = line;
            } else if (!line.empty() && line[0] != '#') {
                entries[line.substr(0, line.find('\t'))] = line;
            }
        }
    }
    runs[ctx.command] = "# run " + ctx.command + " config_hash " + hex64(ctx.hash) + " seed " + std::to_string(ctx.cfg.seed);
    for (const auto& p : ctx.written) {
        const std::string body = read_file(p);
        const std::string rel = fs::relative(p, ctx.cfg.out).generic_string();
        entries[rel] = rel + '\t' + std::to_string(body.size()) + '\t' + hex64(fnv1a(body.data(), body.size()));
    }
    std::ostringstream os;
    os << "# llm4cp manifest: path, bytes, fnv1a64\n";
    for (const auto& [k, v] : runs)
        os << v << '\n';
    for (const auto& [k, v] : entries)
        os << v << '\n';
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << os.str()))
        throw IoError("cannot write '" + path + "'");
}

std::string velocity_tag(double v)
{
    std::ostringstream os;
    if (v == std::floor(v))
        os << std::setw(3) << std::setfill('0') << static_cast<long long>(v);
    else
        os << v;
    return os.str();
}

std::string to_db_string(double nmse)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << eval::to_db(nmse) << " dB";
    return os.str();
}

std::string test_path(const std::string& dir, double v) { return dir + "/test_v" + velocity_tag(v) + ".cpds"; }

void check_grid(const chansim::Dataset& ds, const config::RunConfig& cfg, const std::string& what)
{
    const auto& a = ds.scenario;
    const auto& b = cfg.scenario;
    if (a.num_rb != b.num_rb || a.history != b.history || a.horizon != b.horizon)
        throw ConfigError(what + " grid (K=" + std::to_string(a.num_rb) + ", P=" + std::to_string(a.history) + ", L=" +
                          std::to_string(a.horizon) + ") does not match the config (K=" + std::to_string(b.num_rb) +
                          ", P=" + std::to_string(b.history) + ", L=" + std::to_string(b.horizon) + ")");
}

void check_spec_grid(const PredictorSpec& spec, const chansim::Dataset& ds, const std::string& what)
{
    if (auto g = spec_grid(spec)) {
        const auto& sc = ds.scenario;
        if ((*g)[0] != sc.num_rb || (*g)[1] != sc.history || (*g)[2] != sc.horizon)
            throw ConfigError(what + ": model grid (K=" + std::to_string((*g)[0]) + ", P=" + std::to_string((*g)[1]) +
                              ", L=" + std::to_string((*g)[2]) + ") does not match the dataset");
    }
}

chansim::Dataset merge(const std::vector<chansim::Dataset>& sets)
{
    chansim::Dataset all = sets.front();
    for (std::size_t i = 1; i < sets.size(); ++i)
        all.samples.insert(all.samples.end(), sets[i].samples.begin(), sets[i].samples.end());
    return all;
}

// ---- generate ----------------------------------------------------------

int cmd_generate(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const std::string dir = cfg.data_dir();
    make_dir(dir);
    const auto save = [&](const chansim::Dataset& ds, const std::string& path) {
        chansim::save_dataset(ds, path);
        ctx.written.push_back(path);
        const std::string h = hex64(chansim::dataset_hash(ds));
        write_file(ctx, path + ".meta",
                   stamp(ctx) + "samples " + std::to_string(ds.samples.size()) + "\ndataset_hash " + h + "\n");
        std::cout << h << "  " << path << "  (" << ds.samples.size() << " samples)\n";
    };
    save(chansim::build_dataset(cfg.scenario, cfg.train_samples, derive_seed(cfg.seed, 0, 0xD0)), dir + "/train.cpds");
    save(chansim::build_dataset(cfg.scenario, cfg.val_samples, derive_seed(cfg.seed, 1, 0xD0)), dir + "/val.cpds");
    for (std::size_t i = 0; i < cfg.test_velocities_kmh.size(); ++i) {
        const double v = cfg.test_velocities_kmh[i];
        save(chansim::build_dataset(cfg.scenario, cfg.test_samples, derive_seed(cfg.seed, 2 + i, 0xD0), v / 3.6),
             test_path(dir, v));
    }
    return kOk;
}

// ---- train -------------------------------------------------------------

using Model = SequenceModel<float>;

std::shared_ptr<Model> load_model(const std::string& kind, const std::string& path, training::Checkpoint<float>* out = nullptr)
{
    const auto archive = WeightArchive::load(path);
    auto model = make_model<float>(spec_from_archive(kind, archive), 0);
    auto ck = training::checkpoint_from_archive(archive, *model);
    model->params().restore(ck.params);
    if (out)
        *out = std::move(ck);
    return model;
}

void load_weights(Model& model, const std::string& weights)
{
    if (weights.empty())
        return;
    auto* m = dynamic_cast<Llm4cpModel<float>*>(&model);
    if (!m)
        return;
    m->load_backbone(WeightArchive::load(weights));
}

training::TrainResult<float> fit(Context& ctx, Model& model, const chansim::Dataset& train, const chansim::Dataset& val,
                                 training::TrainConfig tc, const training::Checkpoint<float>* resume,
                                 const std::string& log_path)
{
    std::ofstream log;
    if (!log_path.empty()) {
        const bool append = resume != nullptr && fs::exists(log_path);
        log.open(log_path, append ? std::ios::app : std::ios::trunc);
        if (!log)
            throw IoError("cannot write '" + log_path + "'");
        if (!append) {
            const auto n = train.samples.size();
            const auto used = tc.few_shot == 1.0 ? n : static_cast<std::size_t>(std::floor(tc.few_shot * static_cast<double>(n)));
            log << stamp(ctx) << "# train_samples " << used << " of " << n << '\n' << "epoch\tlr\ttrain_nmse\tval_nmse\n";
        }
    }
    auto progress = [&](const training::EpochLog& e) {
        std::cerr << model.kind() << " epoch " << e.epoch + 1 << "/" << tc.epochs << "  lr " << e.lr << "  train "
                  << to_db_string(e.train_loss) << "  val " << to_db_string(e.val_loss) << '\n';
        if (log)
            log << std::setprecision(9) << e.epoch << '\t' << e.lr << '\t' << e.train_loss << '\t' << e.val_loss << '\n';
    };
    return training::train<float>(model, train, val, tc, resume, progress);
}

int cmd_train(Context& ctx, bool resume)
{
    const auto& cfg = ctx.cfg;
    const std::string dir = cfg.data_dir();
    const auto train = chansim::load_dataset(dir + "/train.cpds");
    const auto val = chansim::load_dataset(dir + "/val.cpds");
    check_grid(train, cfg, dir + "/train.cpds");
    check_grid(val, cfg, dir + "/val.cpds");
    const std::string ck_dir = cfg.checkpoint_dir();
    make_dir(ck_dir);
    bool diverged = false;
    for (const auto& kind : cfg.predictors) {
        const auto spec = cfg.spec(kind);
        if (!spec.trainable()) {
            std::cerr << kind << ": nothing to train\n";
            continue;
        }
        const std::string base = ck_dir + "/" + kind;
        std::shared_ptr<Model> model;
        training::Checkpoint<float> state;
        const training::Checkpoint<float>* from = nullptr;
        if (resume && fs::exists(base + ".last.cpwt")) {
            model = load_model(kind, base + ".last.cpwt", &state);
            check_spec_grid(spec_from_archive(kind, WeightArchive::load(base + ".last.cpwt")), train, base + ".last.cpwt");
            if (state.seed != cfg.seed)
                throw ConfigError(base + ".last.cpwt was trained with seed " + std::to_string(state.seed));
            from = &state;
            std::cerr << kind << ": resuming after epoch " << state.epoch << '\n';
        } else {
            model = make_model<float>(spec, cfg.seed);
            load_weights(*model, cfg.weights);
        }
        const auto counts = model->params().counts();
        std::cerr << kind << ": " << counts.trainable << " trainable / " << counts.total << " parameters\n";
        auto res = fit(ctx, *model, train, val, cfg.train, from, base + ".log.tsv");
        ctx.written.push_back(base + ".log.tsv");
        training::save_checkpoint(res.best, *model, base + ".cpwt", ctx.hash);
        ctx.written.push_back(base + ".cpwt");
        ctx.written.push_back(base + ".cpwt.meta");
        if (!res.last.params.empty()) {
            training::save_checkpoint(res.last, *model, base + ".last.cpwt", ctx.hash);
            ctx.written.push_back(base + ".last.cpwt");
            ctx.written.push_back(base + ".last.cpwt.meta");
        }
        if (res.diverged) {
            std::cerr << kind << ": training diverged, kept the last finite state\n";
            diverged = true;
        }
    }
    if (diverged)
        throw DivergedError("training diverged");
    return kOk;
}

// ---- evaluate ----------------------------------------------------------

struct Loaded {
    std::string kind;
    std::unique_ptr<Predictor> fixed;
    std::shared_ptr<Model> model;
    std::unique_ptr<Predictor> wrapped;
    std::string archive_path;

    Predictor* get() { return fixed ? fixed.get() : wrapped.get(); }
};

Loaded load_predictor(const config::RunConfig& cfg, const std::string& kind, const chansim::Dataset& ref)
{
    Loaded l;
    l.kind = kind;
    const auto spec = cfg.spec(kind);
    if (!spec.trainable()) {
        l.fixed = make_fixed_predictor(spec);
        return l;
    }
    l.archive_path = cfg.checkpoint_dir() + "/" + kind + ".cpwt";
    if (!fs::exists(l.archive_path))
        return l;
    l.model = load_model(kind, l.archive_path);
    check_spec_grid(spec_from_archive(kind, WeightArchive::load(l.archive_path)), ref, l.archive_path);
    l.wrapped = std::make_unique<ModelPredictor<float>>(kind, l.model);
    return l;
}

std::string report_base(const config::RunConfig& cfg, eval::Suite s, const std::string& pred)
{
    return cfg.report_dir() + "/" + eval::to_string(s) + "_" + pred + "_s" + std::to_string(cfg.seed);
}

void write_report(Context& ctx, eval::EvalReport rep, eval::Suite s, const std::string& pred)
{
    rep.config_hash = hex64(ctx.hash);
    const std::string base = report_base(ctx.cfg, s, pred);
    write_file(ctx, base + ".tsv", rep.to_tsv());
    auto j = rep.to_json();
    j["seed"] = ctx.cfg.seed;
    j["suite"] = eval::to_string(s);
    write_file(ctx, base + ".json", j.dump(1) + "\n");
}

eval::EvalReport merge_reports(std::vector<eval::EvalReport> parts)
{
    eval::EvalReport all;
    for (auto& p : parts) {
        all.rows.insert(all.rows.end(), p.rows.begin(), p.rows.end());
        all.params.insert(p.params.begin(), p.params.end());
    }
    return all;
}

void add_params(eval::EvalReport& rep, const Loaded& l)
{
    if (l.model) {
        const auto c = l.model->params().counts();
        rep.params[l.kind] = {c.trainable, c.total};
    } else if (l.fixed) {
        rep.params[l.kind] = {0, 0};
    }
}

// Deterministic k-sample subset of a dataset.
chansim::Dataset take_shots(const chansim::Dataset& ds, int k, std::uint64_t seed)
{
    if (static_cast<std::size_t>(k) > ds.samples.size())
        throw ConfigError("shots = " + std::to_string(k) + " exceeds the " + std::to_string(ds.samples.size()) +
                          " training samples");
    std::vector<std::size_t> idx(ds.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k), 0xC5));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    chansim::Dataset out;
    out.scenario = ds.scenario;
    out.version = ds.version;
    for (auto i : idx)
        out.samples.push_back(ds.samples[i]);
    return out;
}

int cmd_evaluate(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const std::string dir = cfg.data_dir();
    std::vector<chansim::Dataset> tests;
    for (double v : cfg.test_velocities_kmh) {
        tests.push_back(chansim::load_dataset(test_path(dir, v)));
        check_grid(tests.back(), cfg, test_path(dir, v));
    }
    const chansim::Dataset merged = merge(tests);
    make_dir(cfg.report_dir());

    std::vector<Loaded> preds;
    std::vector<std::string> missing;
    for (const auto& kind : cfg.predictors) {
        preds.push_back(load_predictor(cfg, kind, tests.front()));
        if (!preds.back().get())
            missing.push_back(preds.back().archive_path);
    }

    std::optional<chansim::Dataset> train_set, val_set;
    const auto need_train = [&] {
        if (!train_set) {
            train_set = chansim::load_dataset(dir + "/train.cpds");
            val_set = chansim::load_dataset(dir + "/val.cpds");
            check_grid(*train_set, cfg, dir + "/train.cpds");
        }
    };

    for (auto suite : cfg.suites) {
        for (auto& l : preds) {
            const std::vector<eval::NamedPredictor> one{{l.kind, l.get()}};
            eval::EvalReport rep;
            if (suite == eval::Suite::VelocitySweep) {
                std::vector<eval::Condition> conds;
                for (std::size_t i = 0; i < tests.size(); ++i)
                    conds.push_back({velocity_tag(cfg.test_velocities_kmh[i]) + "kmh", cfg.test_velocities_kmh[i], &tests[i]});
                rep = eval::run_suite(suite, one, conds, cfg.link, cfg.seed);
            } else if (suite == eval::Suite::NoiseSweep) {
                std::vector<eval::Condition> conds;
                for (double snr : cfg.noise_snrs_db) {
                    std::ostringstream label;
                    label << snr << "dB";
                    conds.push_back({label.str(), snr, &merged, snr});
                }
                rep = eval::run_suite(suite, one, conds, cfg.link, cfg.seed);
            } else if (suite == eval::Suite::FewShot) {
                std::vector<eval::EvalReport> parts;
                for (double frac : cfg.few_shot_fracs) {
                    std::ostringstream label;
                    label << "frac" << frac;
                    const eval::Condition cond{label.str(), frac, &merged};
                    const auto spec = cfg.spec(l.kind);
                    if (!spec.trainable()) {
                        parts.push_back(eval::run_suite(suite, one, {cond}, cfg.link, cfg.seed));
                        continue;
                    }
                    need_train();
                    auto model = make_model<float>(spec, cfg.seed);
                    load_weights(*model, cfg.weights);
                    auto tc = cfg.train;
                    tc.few_shot = frac;
                    const auto res = fit(ctx, *model, *train_set, *val_set, tc, nullptr, "");
                    if (res.diverged)
                        throw DivergedError(l.kind + " diverged in the few-shot run at fraction " + label.str());
                    ModelPredictor<float> p(l.kind, model);
                    parts.push_back(eval::run_suite(suite, {{l.kind, &p}}, {cond}, cfg.link, cfg.seed));
                    const auto c = model->params().counts();
                    parts.back().params[l.kind] = {c.trainable, c.total};
                }
                rep = merge_reports(std::move(parts));
            } else {
                // cross suites: checkpoints trained elsewhere, target data in `data`
                std::vector<eval::EvalReport> parts;
                for (int k : cfg.shots) {
                    const eval::Condition cond{"shots" + std::to_string(k), static_cast<double>(k), &merged};
                    if (k == 0 || !l.model) {
                        parts.push_back(eval::run_suite(suite, one, {cond}, cfg.link, cfg.seed));
                        continue;
                    }
                    need_train();
                    auto model = load_model(l.kind, l.archive_path);
                    const auto subset = take_shots(*train_set, k, cfg.seed);
                    const auto res = fit(ctx, *model, subset, *val_set, cfg.train, nullptr, "");
                    if (res.diverged)
                        throw DivergedError(l.kind + " diverged while fine-tuning on " + std::to_string(k) + " samples");
                    ModelPredictor<float> p(l.kind, model);
                    parts.push_back(eval::run_suite(suite, {{l.kind, &p}}, {cond}, cfg.link, cfg.seed));
                }
                rep = merge_reports(std::move(parts));
            }
            if (suite != eval::Suite::FewShot)
                add_params(rep, l);
            write_report(ctx, std::move(rep), suite, l.kind);
            std::cerr << eval::to_string(suite) << " / " << l.kind << (l.get() ? "" : " (absent)") << " done\n";
        }
    }

    if (cfg.timing) {
        SamplePtrs batch;
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.train.batch), tests.front().samples.size());
        for (std::size_t i = 0; i < n; ++i)
            batch.push_back(&tests.front().samples[i]);
        for (auto& l : preds) {
            if (!l.get())
                continue;
            const auto row = eval::timing_probe<float>(l.kind, *l.get(), l.model.get(), batch);
            nlohmann::json j = {{"config_hash", hex64(ctx.hash)}, {"seed", cfg.seed}, {"predictor", row.predictor},
                                {"train_ms", row.train_ms}, {"infer_ms", row.infer_ms}, {"batch", row.batch}};
            write_file(ctx, cfg.report_dir() + "/timing_" + l.kind + "_s" + std::to_string(cfg.seed) + ".json", j.dump(1) + "\n");
        }
    }

    if (!missing.empty()) {
        std::cerr << "missing checkpoints (rows marked absent):\n";
        for (const auto& m : missing)
            std::cerr << "  " << m << '\n';
        return kIncomplete;
    }
    return kOk;
}

// ---- report ------------------------------------------------------------

std::string fmt(const nlohmann::json& v)
{
    if (v.is_null())
        return "nan";
    std::ostringstream os;
    os << std::setprecision(9) << v.get<double>();
    return os.str();
}

int predictor_rank(const std::string& p)
{
    const auto& k = predictor_kinds();
    const auto it = std::find(k.begin(), k.end(), p);
    return it == k.end() ? static_cast<int>(k.size()) : static_cast<int>(it - k.begin());
}

int cmd_report(Context& ctx)
{
    const std::string dir = ctx.cfg.report_dir();
    std::vector<std::string> files, timing_files;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir)) {
            const auto name = e.path().filename().string();
            if (e.path().extension() != ".json")
                continue;
            (name.rfind("timing_", 0) == 0 ? timing_files : files).push_back(e.path().string());
        }
    if (files.empty())
        throw IoError("no evaluation reports found in '" + dir + "'");
    std::sort(files.begin(), files.end());
    std::sort(timing_files.begin(), timing_files.end());

    // suite -> (x, label) -> predictor -> row values
    struct Cell {
        nlohmann::json nmse_db, se, se_perfect, ber;
    };
    std::map<std::string, std::map<std::pair<double, std::string>, std::map<std::string, Cell>>> table;
    std::map<std::string, std::set<std::string>> suite_preds;
    std::map<std::string, std::pair<std::size_t, std::size_t>> params;
    std::set<std::string> sources;
    std::vector<nlohmann::json> docs;
    std::set<std::uint64_t> seeds;
    for (const auto& f : files) {
        try {
            docs.push_back(nlohmann::json::parse(read_file(f)));
            seeds.insert(docs.back().at("seed").get<std::uint64_t>());
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed report '" + f + "': " + e.what());
        }
    }
    // predictors are labelled with their seed only when several seeds are merged
    const bool tag_seed = seeds.size() > 1;
    for (const auto& j : docs) {
        const auto seed = j.at("seed").get<std::uint64_t>();
        sources.insert(j.at("config_hash").get<std::string>() + " seed " + std::to_string(seed));
        const auto& c = j.at("columns");
        for (std::size_t i = 0; i < c.at("suite").size(); ++i) {
            const std::string suite = c["suite"][i];
            std::string pred = c["predictor"][i];
            if (tag_seed)
                pred += "_s" + std::to_string(seed);
            suite_preds[suite].insert(pred);
            table[suite][{c["x"][i].get<double>(), c["condition"][i].get<std::string>()}][pred] =
                Cell{c["nmse_db"][i], c["se"][i], c["se_perfect"][i], c["ber"][i]};
        }
        for (const auto& [k, v] : j.at("params").items())
            params[k] = {v.at("trainable").get<std::size_t>(), v.at("total").get<std::size_t>()};
    }

    const std::string out_dir = ctx.cfg.out + "/figures";
    make_dir(out_dir);
    std::string header;
    for (const auto& s : sources)
        header += "# source config_hash " + s + "\n";

    const auto ordered = [](const std::set<std::string>& s) {
        std::vector<std::string> v(s.begin(), s.end());
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return predictor_rank(a) < predictor_rank(b); });
        return v;
    };
    const std::map<std::string, std::string> axis = {{"velocity_sweep", "velocity_kmh"},
                                                     {"noise_sweep", "history_snr_db"},
                                                     {"few_shot", "train_fraction"},
                                                     {"cross_scenario", "shots"},
                                                     {"cross_frequency", "shots"}};
    for (const auto& [suite, rows] : table) {
        const auto preds = ordered(suite_preds[suite]);
        const auto pivot = [&](const std::string& name, auto getter) {
            std::ostringstream os;
            os << header << axis.at(suite);
            for (const auto& p : preds)
                os << '\t' << p;
            os << '\n';
            for (const auto& [key, cells] : rows) {
                os << std::setprecision(9) << key.first;
                for (const auto& p : preds) {
                    const auto it = cells.find(p);
                    os << '\t' << (it == cells.end() ? "nan" : fmt(getter(it->second)));
                }
                os << '\n';
            }
            write_file(ctx, out_dir + "/" + suite + "_" + name + ".tsv", os.str());
        };
        pivot("nmse_db", [](const Cell& c) { return c.nmse_db; });
        pivot("se", [](const Cell& c) { return c.se; });
        pivot("ber", [](const Cell& c) { return c.ber; });
    }
    {
        std::ostringstream os;
        os << header << "predictor\ttrainable\ttotal\n";
        std::vector<std::string> names;
        for (const auto& [k, v] : params)
            names.push_back(k);
        std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) { return predictor_rank(a) < predictor_rank(b); });
        for (const auto& k : names)
            os << k << '\t' << params[k].first << '\t' << params[k].second << '\n';
        write_file(ctx, out_dir + "/params.tsv", os.str());
    }
    if (!timing_files.empty()) {
        std::ostringstream os;
        os << header << "predictor\tseed\tbatch\ttrain_ms\tinfer_ms\n" << std::setprecision(6);
        for (const auto& f : timing_files) {
            const auto j = nlohmann::json::parse(read_file(f));
            os << j.at("predictor").get<std::string>() << '\t' << j.at("seed").get<std::uint64_t>() << '\t'
               << j.at("batch").get<int>() << '\t' << j.at("train_ms").get<double>() << '\t'
               << j.at("infer_ms").get<double>() << '\n';
        }
        write_file(ctx, out_dir + "/cost.tsv", os.str());
    }
    for (const auto& p : ctx.written)
        std::cout << p << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"llm4cp: CSI prediction data generation, training and evaluation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    std::string config_path;
    config::KeyValues flags;
    bool resume = false;
    std::vector<std::string> sets;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration file (key = value)");
        const auto flag_opt = [&](const std::string& name, const std::string& key, const std::string& help) {
            sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
        };
        flag_opt("--seed", "seed", "Master seed");
        flag_opt("--out", "out", "Output root directory");
        flag_opt("--data", "data", "Dataset directory (default <out>/data)");
        flag_opt("--checkpoints", "checkpoints", "Checkpoint directory (default <out>/checkpoints)");
        flag_opt("--predictor", "predictor", "Comma-separated predictors");
        flag_opt("--suite", "suite", "Comma-separated evaluation suites");
        flag_opt("--few-shot-frac", "few_shot_frac", "Fraction of the training set to use");
        flag_opt("--snr", "snr", "Communication SNR in dB");
        flag_opt("--duplex", "duplex", "tdd or fdd");
        flag_opt("--weights", "weights", "Pretrained backbone archive");
        flag_opt("--epochs", "epochs", "Training epochs");
        sub->add_flag_callback("--desk-scale", [&flags] { flags["desk_scale"] = "true"; }, "Single-core scale");
        sub->add_option("--set", sets, "Any config key as key=value (repeatable)");
    };

    auto* gen = app.add_subcommand("generate", "Write train/val/test datasets");
    auto* trn = app.add_subcommand("train", "Train predictors and write checkpoints");
    auto* evl = app.add_subcommand("evaluate", "Run evaluation suites and write reports");
    auto* rep = app.add_subcommand("report", "Merge reports into per-figure data files");
    auto* keys = app.add_subcommand("keys", "List the documented config keys");
    for (auto* s : {gen, trn, evl, rep})
        add_common(s);
    trn->add_flag("--resume", resume, "Continue from <checkpoints>/<predictor>.last.cpwt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    if (keys->parsed()) {
        for (const auto& k : config::documented_keys())
            std::cout << std::left << std::setw(22) << k.key << k.doc << '\n';
        return kOk;
    }

    Context ctx;
    try {
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + s + "'");
            flags[config::trim(s.substr(0, eq))] = config::trim(s.substr(eq + 1));
        }
        const auto file = config_path.empty() ? config::KeyValues{} : config::load_file(config_path);
        ctx.cfg = config::resolve(file, flags);
        ctx.hash = ctx.cfg.hash();
        ctx.command = gen->parsed() ? "generate" : trn->parsed() ? "train" : evl->parsed() ? "evaluate" : "report";
        make_dir(ctx.cfg.out);
        write_file(ctx, ctx.cfg.out + "/" + ctx.command + ".cfg", stamp(ctx) + ctx.cfg.canonical());

        int rc = kOk;
        if (gen->parsed())
            rc = cmd_generate(ctx);
        else if (trn->parsed())
            rc = cmd_train(ctx, resume);
        else if (evl->parsed())
            rc = cmd_evaluate(ctx);
        else
            rc = cmd_report(ctx);
        write_manifest(ctx);
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const DivergedError& e) {
        if (!ctx.written.empty())
            write_manifest(ctx);
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUnexpected;
    }
}
