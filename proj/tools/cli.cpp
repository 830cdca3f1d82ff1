#include "cli.hpp"

#include "ciplan/approx_dp.hpp"
#include "ciplan/belief.hpp"
#include "ciplan/compression.hpp"
#include "ciplan/exact_dp.hpp"
#include "ciplan/model.hpp"
#include "ciplan/report.hpp"
#include "ciplan/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace ciplan::cli {

namespace {

using nlohmann::json;

struct RunConfig {
    std::string command;
    std::string model;
    std::vector<std::string> compressions;
    std::string mu = "uniform";
    long long budget = kDefaultBudget;
    double tol_r = 0;
    double tol_o = 0;
    std::string out_dir = ".";
    std::string format = "table";
    int alg = 1;
    std::string mode = "exact";
};

struct Loaded {
    std::optional<PrivateCompression> pc;
    std::optional<CommonCompression> cc;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": byte " + std::to_string(e.byte), "malformed document");
    }
}

Loaded load_compressions(FcsTree& tree, const RunConfig& cfg) {
    Loaded l;
    for (const auto& path : cfg.compressions) {
        json doc = read_json(path);
        std::string kind = doc.value("kind", "");
        try {
            if (kind == "private") {
                if (l.pc) throw ParseError(path, "more than one private compression");
                l.pc = private_from_json(tree, doc, cfg.budget);
            } else if (kind == "common") {
                if (l.cc) throw ParseError(path, "more than one common compression");
                l.cc = common_from_json(tree, doc);
            } else {
                throw ParseError(path, "field 'kind' must be 'private' or 'common'");
            }
        } catch (const ParseError& e) {
            if (std::string(e.locus()).rfind(path, 0) == 0) throw;
            throw ParseError(path + ": " + e.locus(), std::string(e.what()).substr(e.locus().size() + 2));
        }
    }
    if (l.cc && !l.pc) throw ParseError("--compression", "a common compression needs its private compression");
    return l;
}

class Writer {
public:
    Writer(const RunConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {
        std::filesystem::create_directories(cfg.out_dir);
    }
    void emit(const std::string& stem, const json& doc, const std::string& table) {
        auto base = std::filesystem::path(cfg_.out_dir) / stem;
        std::ofstream(base.string() + ".json") << doc.dump(2) << "\n";
        std::ofstream(base.string() + ".txt") << table;
        if (cfg_.format == "structured")
            out_ << doc.dump(2) << "\n";
        else
            out_ << table;
    }

private:
    const RunConfig& cfg_;
    std::ostream& out_;
};

SolveOptions options_of(const RunConfig& cfg) {
    SolveOptions o;
    o.budget = cfg.budget;
    return o;
}

std::string objective_line(const char* what, double v) {
    std::ostringstream s;
    s.precision(12);
    s << what << " = " << std::fixed << v << "\n";
    return s.str();
}

int cmd_validate(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    json doc{{"valid", true},
             {"name", model.data().name},
             {"agents", model.num_agents()},
             {"states", model.num_states()},
             {"joint_actions", model.num_joint_actions()},
             {"common_obs", model.num_common_obs()},
             {"joint_private_obs", model.num_joint_private_obs()},
             {"horizon", model.horizon()},
             {"reward_bound", model.reward_bound()}};
    w.emit("validate", doc, "valid: " + cfg.model + "\n");
    return ok;
}

int cmd_solve(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    FcsTree tree(model);
    SolveOptions opts = options_of(cfg);
    Loaded l = load_compressions(tree, cfg);
    json doc{{"alg", cfg.alg}};
    ValueTable table;
    switch (cfg.alg) {
    case 1: table = solve_fcs_fps(tree, opts).table; break;
    case 2: {
        PrivateCompression pc = l.pc ? *l.pc : build_exact_private(tree, cfg.budget);
        doc["private"] = pc.name;
        table = solve_fcs_asps(tree, pc, opts).table;
        break;
    }
    case 3: {
        PrivateCompression pc = l.pc ? *l.pc : build_exact_private(tree, cfg.budget);
        LabelTree lt = build_label_tree(tree, pc, cfg.budget);
        CommonCompression cc = l.cc ? *l.cc : bcs_common(tree, pc, lt);
        doc["private"] = pc.name;
        doc["common"] = cc.name;
        doc["mu"] = cfg.mu;
        table = solve_ascs_asps(tree, pc, lt, cc, cfg.mu, opts).table;
        break;
    }
    case 4: table = solve_bcs_fps(model, opts).table; break;
    case 5: {
        tree.build_full(cfg.budget);
        SpiMap spi = l.pc ? *l.pc : identity_private(tree, cfg.budget);
        doc["private"] = spi.name;
        table = solve_bcs_spi(tree, spi, opts).table;
        break;
    }
    default: throw DomainError("--alg must be 1 to 5");
    }
    doc["objective"] = table.objective;
    doc["table"] = value_table_json(table);
    w.emit("solve", doc, value_table_text(table));
    return ok;
}

int cmd_compress(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    FcsTree tree(model);
    PrivateCompression pc = cfg.mode == "exact" ? build_exact_private(tree, cfg.budget)
                                                : build_greedy(tree, cfg.tol_r, cfg.tol_o, cfg.budget);
    MeasuredParams pm = measure_private(tree, pc);
    LabelTree lt = build_label_tree(tree, pc, cfg.budget);
    CommonCompression cc = bcs_common(tree, pc, lt);
    MeasuredParams cm = measure_common(tree, pc, lt, cc, cfg.mu);
    pm.eps_c = cm.eps_c;
    pm.delta_c = cm.delta_c;
    pm.eps_c_witness = cm.eps_c_witness;
    pm.delta_c_witness = cm.delta_c_witness;
    std::filesystem::create_directories(cfg.out_dir);
    auto dir = std::filesystem::path(cfg.out_dir);
    std::ofstream((dir / "private.json").string()) << private_to_json(tree, pc, &pm).dump(2) << "\n";
    std::ofstream((dir / "common.json").string()) << common_to_json(tree, cc, &pm).dump(2) << "\n";
    json doc{{"mode", cfg.mode},
             {"private", pc.name},
             {"common", cc.name},
             {"files", {"private.json", "common.json"}},
             {"params", pm.to_json()}};
    w.emit("compress", doc, params_text(pm));
    return ok;
}

int cmd_measure(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    FcsTree tree(model);
    tree.build_full(cfg.budget);
    Loaded l = load_compressions(tree, cfg);
    if (!l.pc) throw ParseError("--compression", "measure needs a private compression");
    auto rec = check_recursive(tree, *l.pc);
    if (!rec.pass)
        throw CompressionError("private compression is not recursive: " + rec.violations.front().edge + ": " +
                               rec.violations.front().detail);
    MeasuredParams m = measure_private(tree, *l.pc);
    if (l.cc) {
        LabelTree lt = build_label_tree(tree, *l.pc, cfg.budget);
        MeasuredParams c = measure_common(tree, *l.pc, lt, *l.cc, cfg.mu);
        m.eps_c = c.eps_c;
        m.delta_c = c.delta_c;
        m.eps_c_witness = c.eps_c_witness;
        m.delta_c_witness = c.delta_c_witness;
    }
    m.mu = cfg.mu;
    w.emit("measure", m.to_json(), params_text(m));
    return ok;
}

int cmd_verify_gap(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    FcsTree tree(model);
    tree.build_full(cfg.budget);
    Loaded l = load_compressions(tree, cfg);
    PrivateCompression pc = l.pc ? *l.pc : build_exact_private(tree, cfg.budget);
    LabelTree lt = build_label_tree(tree, pc, cfg.budget);
    CommonCompression cc = l.cc ? *l.cc : bcs_common(tree, pc, lt);
    GapReport rep = verify_gaps(tree, pc, lt, cc, cfg.mu, options_of(cfg));
    w.emit("gap", rep.to_json(), rep.to_table());
    if (!rep.complete) return budget_exhausted;
    return rep.pass ? ok : verification_failed;
}

int cmd_oracle(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    FcsTree tree(model);
    double v = brute_force_value(tree, cfg.budget);
    json doc{{"objective", v}, {"policies", count_policies(tree)}};
    w.emit("oracle", doc, objective_line("J (brute force)", v));
    return ok;
}

int cmd_check_conditions(const RunConfig& cfg, Writer& w) {
    DecPomdpModel model = load_model_file(cfg.model);
    FcsTree tree(model);
    tree.build_full(cfg.budget);
    Loaded l = load_compressions(tree, cfg);
    PrivateCompression pc = l.pc ? *l.pc : build_exact_private(tree, cfg.budget);
    json doc{{"private", pc.name}};
    std::string text;

    ConditionReport spi = check_spi(tree, pc);
    doc["spi"] = spi.to_json();
    text += "SPI conditions\n" + conditions_text(spi);

    RecursionReport asps = check_recursive(tree, pc);
    doc["asps_recursive"] = asps.to_json();
    text += std::string("ASPS recursive update: ") + (asps.pass ? "ok" : "FAIL") + "\n";
    if (asps.pass) {
        LabelTree lt = build_label_tree(tree, pc, cfg.budget);
        CommonCompression cc = l.cc ? *l.cc : bcs_common(tree, pc, lt);
        RecursionReport ascs = check_recursive(tree, pc, lt, cc);
        doc["common"] = cc.name;
        doc["ascs_recursive"] = ascs.to_json();
        text += std::string("ASCS recursive update: ") + (ascs.pass ? "ok" : "FAIL") + "\n";
    }

    ConditionReport lemmas = check_lemmas(tree, pc, options_of(cfg));
    doc["lemmas"] = lemmas.to_json();
    text += "Lemmas\n" + conditions_text(lemmas);

    ConditionReport props = verify_propositions(tree, pc);
    doc["propositions"] = props.to_json();
    text += "Propositions\n" + conditions_text(props);

    bool pass = lemmas.pass() && props.pass();
    doc["pass"] = pass;
    w.emit("conditions", doc, text);
    return pass ? ok : verification_failed;
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Dec-POMDP planning with the common-information coordinator"};
    app.require_subcommand(1);
    auto add_common = [&](CLI::App* sub, bool compressions) {
        sub->add_option("--model", cfg.model, "model document")->required()->check(CLI::ExistingFile);
        if (compressions)
            sub->add_option("--compression", cfg.compressions, "private or common compression document (repeatable)")
                ->check(CLI::ExistingFile);
        sub->add_option("--mu", cfg.mu, "reference weights for common mixtures")
            ->check(CLI::IsMember({"uniform"}));
        sub->add_option("--budget", cfg.budget, "evaluation cap")->check(CLI::PositiveNumber);
        sub->add_option("--out", cfg.out_dir, "report directory");
        sub->add_option("--format", cfg.format, "stdout format")->check(CLI::IsMember({"table", "structured"}));
    };
    auto* validate = app.add_subcommand("validate", "check model invariants");
    add_common(validate, false);
    auto* solve = app.add_subcommand("solve", "run a dynamic program");
    add_common(solve, true);
    solve->add_option("--alg", cfg.alg, "1 FCS/FPS, 2 FCS/label, 3 common label, 4 belief, 5 belief/SPI")
        ->check(CLI::Range(1, 5));
    auto* compress = app.add_subcommand("compress", "build a private compression and its belief common compression");
    add_common(compress, false);
    compress->add_option("--mode", cfg.mode, "exact or greedy")->check(CLI::IsMember({"exact", "greedy"}));
    compress->add_option("--tol-r", cfg.tol_r, "reward tolerance (greedy)")->check(CLI::NonNegativeNumber);
    compress->add_option("--tol-o", cfg.tol_o, "observation tolerance (greedy)")->check(CLI::NonNegativeNumber);
    auto* measure = app.add_subcommand("measure", "measure compression errors");
    add_common(measure, true);
    auto* gap = app.add_subcommand("verify-gap", "compare DP gaps with the bounds");
    add_common(gap, true);
    auto* oracle = app.add_subcommand("oracle", "brute-force policy enumeration");
    add_common(oracle, false);
    auto* conditions = app.add_subcommand("check-conditions", "SPI, recursion, lemma and proposition checks");
    add_common(conditions, true);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }
    cfg.command = app.get_subcommands().front()->get_name();

    try {
        auto start = std::chrono::steady_clock::now();
        Writer w(cfg, out);
        int code = ok;
        if (cfg.command == "validate") code = cmd_validate(cfg, w);
        else if (cfg.command == "solve") code = cmd_solve(cfg, w);
        else if (cfg.command == "compress") code = cmd_compress(cfg, w);
        else if (cfg.command == "measure") code = cmd_measure(cfg, w);
        else if (cfg.command == "verify-gap") code = cmd_verify_gap(cfg, w);
        else if (cfg.command == "oracle") code = cmd_oracle(cfg, w);
        else code = cmd_check_conditions(cfg, w);
        if (cfg.format == "table") {
            auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            out << "elapsed " << static_cast<long long>(ms) << " ms\n";
        }
        return code;
    } catch (const ValidationError& e) {
        err << "error: invalid model " << cfg.model << "\n";
        for (const auto& v : e.violations()) err << "  " << v << "\n";
        return input_error;
    } catch (const BudgetExceeded& e) {
        err << "error: " << e.what() << "\n";
        return budget_exhausted;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }
}

} // namespace ciplan::cli
