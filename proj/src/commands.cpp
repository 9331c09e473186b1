#include "qds/commands.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <utility>

#include "json.hpp"

#include "qds/adversary.hpp"
#include "qds/channel.hpp"
#include "qds/errors.hpp"
#include "qds/format.hpp"
#include "qds/protocol.hpp"
#include "qds/rng.hpp"
#include "qds/session.hpp"
#include "qds/store.hpp"

namespace qds::commands {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

std::string cell(double v) { return qds::format_double(v); }
std::string cell(std::int64_t v) { return qds::format_int(v); }
std::string cell(bool v) { return v ? "true" : "false"; }
std::string cell(const std::string& v) { return v; }

std::string cell(const std::optional<double>& v) { return v ? cell(*v) : std::string(); }
std::string cell(const std::optional<std::int64_t>& v) { return v ? cell(*v) : std::string(); }

std::string csv_line(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i != 0) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(); }
json opt_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(); }

std::string render_json(const json& j) { return j.dump(2) + "\n"; }

bool is_csv(const config::RunConfig& config) { return config.output.format == "csv"; }

// Which max-branch the guessing formula itself picked, independent of any
// override.
const char* formula_branch(const security::EveError& eve) {
    return eve.individual_term >= eve.sequential_term ? "individual" : "sequential";
}

const char* provenance_of(bool overridden) {
    return overridden ? "override" : "formula-evaluated";
}

json verdict_json(const protocol::Verdict& v) {
    return json{
        {"accepted", v.accepted},
        {"bob_origin_mismatches", v.bob_origin_mismatches},
        {"charlie_origin_mismatches", v.charlie_origin_mismatches},
        {"mismatches", v.mismatches},
        {"positions_checked", v.positions_checked},
        {"role", protocol::to_string(v.role)},
        {"threshold_fraction", v.threshold_fraction},
    };
}

} // namespace

DerivedSetup derive_setup(const config::RunConfig& config) {
    config.validate();

    security::SecurityInputs inputs;
    inputs.mu = config.link.mu;
    inputs.t = channel::total_transmittance(config.link);
    inputs.e = channel::expected_qber(config.link);
    inputs.p_e_override = config.security.p_e_override;

    std::optional<security::Count> k;
    if (config.security.k_policy == "fixed") k = *config.security.k;
    std::optional<security::Count> l;
    if (config.protocol.l) l = *config.protocol.l;

    DerivedSetup setup;
    setup.params = security::derive_security_params(inputs, config.security.epsilon, k, l);
    setup.convention = security::rate_convention_from_string(config.security.rate_convention);
    setup.detection_rate_hz = channel::effective_detection_rate(config.link);
    setup.detection_rate_modeled_hz = channel::expected_detection_rate(config.link);
    setup.rate_bits_per_s =
        security::signing_rate(setup.detection_rate_hz, setup.params.l, setup.convention);
    setup.time_to_sign_half_bit_s = 0.5 / setup.rate_bits_per_s;
    setup.capacity_signed_bits =
        security::signing_capacity(config.protocol.shared_bits, setup.params.l, setup.params.k);
    return setup;
}

CommandResult cmd_params(const config::RunConfig& config) {
    const auto setup = derive_setup(config);
    const auto& p = setup.params;
    const auto& eve = p.eve;
    const bool discrepancy = eve.overridden && std::abs(eve.p_e - eve.formula_value) > 1e-12;

    CommandResult result;
    if (is_csv(config)) {
        const std::string provenance =
            std::string("e=") + provenance_of(config.link.qber_override.has_value()) +
            ";p_e=" + provenance_of(eve.overridden) +
            ";detection_rate=" + provenance_of(config.link.detection_rate_override_hz.has_value()) +
            ";l=" + provenance_of(config.protocol.l.has_value());
        result.output += csv_line({"mu", "t", "e", "p_e", "p_e_formula", "p_e_formula_branch",
                                   "p_e_discrepancy", "branch", "g", "s_a", "s_v", "epsilon", "l",
                                   "k", "bound_honest", "bound_repudiation", "bound_forge",
                                   "detection_rate_hz", "detection_rate_modeled_hz",
                                   "rate_convention", "rate_bits_per_s",
                                   "time_to_sign_half_bit_s", "capacity_signed_bits",
                                   "provenance"});
        result.output += csv_line(
            {cell(p.inputs.mu), cell(p.inputs.t), cell(p.inputs.e), cell(eve.p_e),
             cell(eve.formula_value), formula_branch(eve), cell(discrepancy),
             security::to_string(eve.branch), cell(p.thresholds.g), cell(p.thresholds.s_a),
             cell(p.thresholds.s_v), cell(p.epsilon), cell(p.l), cell(p.k),
             cell(p.bounds.honest), cell(p.bounds.repudiation), cell(p.bounds.forge),
             cell(setup.detection_rate_hz), cell(setup.detection_rate_modeled_hz),
             security::to_string(setup.convention), cell(setup.rate_bits_per_s),
             cell(setup.time_to_sign_half_bit_s), cell(setup.capacity_signed_bits), provenance});
        return result;
    }

    json report;
    report["command"] = "params";
    report["mu"] = p.inputs.mu;
    report["t"] = p.inputs.t;
    report["e"] = p.inputs.e;
    report["p_e"] = eve.p_e;
    report["p_e_formula"] = eve.formula_value;
    report["p_e_formula_branch"] = formula_branch(eve);
    report["p_e_discrepancy"] = discrepancy;
    report["branch"] = security::to_string(eve.branch);
    report["g"] = p.thresholds.g;
    report["s_a"] = p.thresholds.s_a;
    report["s_v"] = p.thresholds.s_v;
    report["epsilon"] = p.epsilon;
    report["l"] = p.l;
    report["k"] = p.k;
    report["bound_honest"] = p.bounds.honest;
    report["bound_repudiation"] = p.bounds.repudiation;
    report["bound_forge"] = p.bounds.forge;
    report["detection_rate_hz"] = setup.detection_rate_hz;
    report["detection_rate_modeled_hz"] = setup.detection_rate_modeled_hz;
    report["rate_convention"] = security::to_string(setup.convention);
    report["rate_bits_per_s"] = setup.rate_bits_per_s;
    report["time_to_sign_half_bit_s"] = setup.time_to_sign_half_bit_s;
    report["capacity_signed_bits"] = setup.capacity_signed_bits;
    report["provenance"] = json{
        {"e", provenance_of(config.link.qber_override.has_value())},
        {"p_e", provenance_of(eve.overridden)},
        {"detection_rate", provenance_of(config.link.detection_rate_override_hz.has_value())},
        {"l", provenance_of(config.protocol.l.has_value())},
    };
    result.output = render_json(report);
    return result;
}

namespace {

struct SweepRow {
    std::string source;
    std::optional<double> fiber_loss_db;
    std::optional<double> distance_km;
    std::optional<double> detection_rate_hz;
    std::optional<double> e;
    std::optional<double> p_e;
    std::optional<std::int64_t> l;
    std::optional<double> rate_bits_per_s;
    std::optional<double> time_to_sign_half_bit_s;
    bool feasible = true;
    std::string note;
};

json sweep_row_json(const SweepRow& row) {
    return json{
        {"source", row.source},
        {"fiber_loss_db", opt_json(row.fiber_loss_db)},
        {"distance_km", opt_json(row.distance_km)},
        {"detection_rate_hz", opt_json(row.detection_rate_hz)},
        {"e", opt_json(row.e)},
        {"p_e", opt_json(row.p_e)},
        {"l", opt_json(row.l)},
        {"rate_bits_per_s", opt_json(row.rate_bits_per_s)},
        {"time_to_sign_half_bit_s", opt_json(row.time_to_sign_half_bit_s)},
        {"feasible", row.feasible},
        {"note", row.note},
    };
}

// Demonstrations this scheme is compared against, quoted as fixed constants.
std::vector<SweepRow> reference_rows() {
    std::vector<SweepRow> rows(3);
    rows[0].source = "published-constant";
    rows[0].time_to_sign_half_bit_s = 252460800.0; // eight years of 365.25 days
    rows[0].rate_bits_per_s = 0.5 / 252460800.0;
    rows[0].note = "prior multipoint scheme";

    rows[1].source = "published-constant";
    rows[1].distance_km = 0.5;
    rows[1].time_to_sign_half_bit_s = 20.0;
    rows[1].rate_bits_per_s = 0.5 / 20.0;
    rows[1].note = "prior short-range scheme at 500 m";

    rows[2].source = "published-constant";
    rows[2].distance_km = 1.6;
    rows[2].time_to_sign_half_bit_s = 1.0 / 33.0;
    rows[2].rate_bits_per_s = 33.0 / 2.0;
    rows[2].note = "prior free-space continuous-variable scheme at 1.6 km";
    return rows;
}

} // namespace

CommandResult cmd_sweep(const config::RunConfig& config, const SweepOptions& options) {
    config.validate();
    const bool by_distance = options.variable == "distance_km";
    require(by_distance || options.variable == "fiber_loss_db",
            "sweep: variable must be fiber_loss_db or distance_km");
    require(std::isfinite(options.from) && std::isfinite(options.to) && options.from >= 0.0,
            "sweep: range must be finite and start at >= 0");
    require(options.to >= options.from, "sweep: range end must be >= start");
    require(std::isfinite(options.step) && options.step > 0.0, "sweep: step must be > 0");
    require(std::isfinite(options.loss_per_km) && options.loss_per_km > 0.0,
            "sweep: loss_per_km must be > 0");

    std::vector<SweepRow> rows;
    const auto n_points =
        static_cast<std::size_t>(std::floor((options.to - options.from) / options.step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n_points; ++i) {
        const double x = options.from + static_cast<double>(i) * options.step;
        const double loss = by_distance ? x * options.loss_per_km : x;

        auto point = config;
        point.link.fiber_loss_db = loss;
        // The measured-rate override belongs to the configured operating
        // point; any other loss falls back to the link budget.
        if (loss != config.link.fiber_loss_db) point.link.detection_rate_override_hz.reset();

        SweepRow row;
        row.source = "formula-evaluated";
        row.fiber_loss_db = loss;
        row.distance_km = by_distance ? x : x / options.loss_per_km;
        row.detection_rate_hz = channel::effective_detection_rate(point.link);
        row.e = channel::expected_qber(point.link);
        try {
            const auto setup = derive_setup(point);
            row.p_e = setup.params.eve.p_e;
            row.l = setup.params.l;
            row.rate_bits_per_s = setup.rate_bits_per_s;
            row.time_to_sign_half_bit_s = setup.time_to_sign_half_bit_s;
        } catch (const ValidationError& ex) {
            row.feasible = false;
            row.note = ex.what();
        }
        rows.push_back(std::move(row));
    }
    for (auto& row : reference_rows()) rows.push_back(std::move(row));

    CommandResult result;
    if (is_csv(config)) {
        result.output += csv_line({"source", "fiber_loss_db", "distance_km", "detection_rate_hz",
                                   "e", "p_e", "l", "rate_bits_per_s", "time_to_sign_half_bit_s",
                                   "feasible", "note"});
        for (const auto& row : rows) {
            result.output += csv_line({row.source, cell(row.fiber_loss_db), cell(row.distance_km),
                                       cell(row.detection_rate_hz), cell(row.e), cell(row.p_e),
                                       cell(row.l), cell(row.rate_bits_per_s),
                                       cell(row.time_to_sign_half_bit_s), cell(row.feasible),
                                       row.note});
        }
        return result;
    }

    json report;
    report["command"] = "sweep";
    report["variable"] = options.variable;
    report["loss_per_km"] = options.loss_per_km;
    report["rows"] = json::array();
    for (const auto& row : rows) report["rows"].push_back(sweep_row_json(row));
    result.output = render_json(report);
    return result;
}

namespace {

std::string run_csv(const std::string& stage, double e_hat, std::int64_t l, std::int64_t k,
                    const std::vector<net::MessageReport>& messages) {
    std::string out = csv_line({"stage", "e_hat", "l", "k", "message_index", "message_bit",
                                "party", "role", "accepted", "mismatches", "positions_checked",
                                "threshold_fraction"});
    if (messages.empty()) {
        out += csv_line({stage, cell(e_hat), cell(l), cell(k), "", "", "", "", "", "", "", ""});
        return out;
    }
    for (std::size_t i = 0; i < messages.size(); ++i) {
        const auto& report = messages[i];
        const auto add = [&](const char* party, const protocol::Verdict& v) {
            out += csv_line({stage, cell(e_hat), cell(l), cell(k),
                             cell(static_cast<std::int64_t>(i)),
                             cell(static_cast<std::int64_t>(report.message_bit)), party,
                             protocol::to_string(v.role), cell(v.accepted), cell(v.mismatches),
                             cell(v.positions_checked), cell(v.threshold_fraction)});
        };
        if (report.bob) add("bob", *report.bob);
        if (report.charlie) add("charlie", *report.charlie);
    }
    return out;
}

json material_json(bool m0_present, bool m0_used, bool m1_present, bool m1_used) {
    return json{
        {"m0_present", m0_present},
        {"m0_used", m0_used},
        {"m1_present", m1_present},
        {"m1_used", m1_used},
    };
}

json messages_json(const std::vector<net::MessageReport>& messages) {
    json arr = json::array();
    for (const auto& report : messages) {
        json entry;
        entry["message_bit"] = report.message_bit;
        entry["bob"] = report.bob ? verdict_json(*report.bob) : json();
        entry["charlie"] = report.charlie ? verdict_json(*report.charlie) : json();
        arr.push_back(std::move(entry));
    }
    return arr;
}

bool all_accepted(const std::vector<net::MessageReport>& messages) {
    if (messages.empty()) return false;
    for (const auto& report : messages) {
        if (!report.bob || !report.bob->accepted) return false;
        if (!report.charlie || !report.charlie->accepted) return false;
    }
    return true;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << text;
    if (!out) throw ValidationError("write failed: " + path);
}

} // namespace

CommandResult cmd_run(const config::RunConfig& config, const RunOptions& options) {
    config.validate();
    require(options.stage == "both" || options.stage == "dist" || options.stage == "msg",
            "run: stage must be both, dist or msg");
    const auto seed = config.simulation.seed;
    // The messaging stage replays material from the store, so only the
    // sampling stages need a seed.
    require(seed.has_value() || options.stage == "msg",
            "run: a seed is required (set simulation.seed or pass --seed)");
    const auto transport = net::transport_from_string(options.transport);
    if (options.stage == "both") {
        require(!options.store_path.has_value(), "run: --store applies to stages dist and msg");
    } else {
        require(transport == net::Transport::inproc,
                "run: socket transport applies to stage both only");
        require(options.store_path.has_value(), "run: --store is required for stages dist and msg");
        require(!options.transcript_path.has_value(),
                "run: --transcript applies to stage both only");
    }

    const auto setup = derive_setup(config);
    const auto& thresholds = setup.params.thresholds;

    json report;
    report["command"] = "run";
    report["stage"] = options.stage;
    if (seed) report["seed"] = *seed;

    double e_hat = 0.0;
    // Strings are swapped in exact halves, so an odd derived length rounds up.
    std::int64_t l = setup.params.l + (setup.params.l % 2);
    std::int64_t k = setup.params.k;
    std::vector<net::MessageReport> messages;
    bool signs_m0 = false;
    bool signs_m1 = false;
    for (const auto bit : config.protocol.message_bits) (bit == 0 ? signs_m0 : signs_m1) = true;

    if (options.stage == "both") {
        net::SessionConfig session;
        session.link = config.link;
        session.l = l;
        session.k = k;
        session.thresholds = thresholds;
        session.abort_threshold = thresholds.s_a;
        session.message_bits = config.protocol.message_bits;
        session.seed = *seed;
        const auto outcome = net::run_session(session, transport);
        e_hat = outcome.e_hat;
        messages = outcome.messages;
        if (options.transcript_path) {
            write_text_file(*options.transcript_path, net::transcript_to_jsonl(outcome.transcript));
            report["transcript"] = *options.transcript_path;
        }
        report["transport"] = options.transport;
        report["material"] = material_json(true, signs_m0, true, signs_m1);
    } else if (options.stage == "dist") {
        const auto produced =
            protocol::run_distribution(config.link, l, k, *seed, thresholds.s_a);
        store::save(produced, *options.store_path);
        e_hat = produced.e_hat;
        report["store"] = *options.store_path;
        report["material"] = material_json(true, false, true, false);
    } else {
        auto held = store::load(*options.store_path);
        e_hat = held.e_hat;
        l = held.l;
        k = held.k;
        report["seed"] = held.seed;
        for (const auto bit : config.protocol.message_bits) {
            const auto outcome =
                protocol::run_messaging(held.alice, held.bob, held.charlie, bit, thresholds);
            net::MessageReport entry;
            entry.message_bit = bit;
            entry.bob = outcome.bob;
            entry.charlie = outcome.charlie;
            messages.push_back(std::move(entry));
        }
        store::save(held, *options.store_path);
        report["store"] = *options.store_path;
        report["material"] = material_json(held.alice.messages[0].present,
                                           held.alice.messages[0].used,
                                           held.alice.messages[1].present,
                                           held.alice.messages[1].used);
    }

    report["e_hat"] = e_hat;
    report["l"] = l;
    report["k"] = k;
    CommandResult result;
    if (options.stage == "dist") {
        result.exit_code = 0;
    } else {
        report["all_accepted"] = all_accepted(messages);
        report["messages"] = messages_json(messages);
        result.exit_code = all_accepted(messages) ? 0 : 2;
    }

    result.output =
        is_csv(config) ? run_csv(options.stage, e_hat, l, k, messages) : render_json(report);
    return result;
}

namespace {

struct SimRow {
    std::string attack;
    std::optional<double> e;
    std::optional<double> p_e;
    std::int64_t l = 0;
    std::optional<double> s_a;
    std::optional<double> s_v;
    std::optional<double> p_bob_origin;
    std::optional<double> p_charlie_origin;
    adversary::AttackOutcome outcome;
    double wilson_width = 0.0;
    bool pass = true;
};

SimRow make_row(std::string attack, std::int64_t l, const adversary::AttackOutcome& outcome) {
    SimRow row;
    row.attack = std::move(attack);
    row.l = l;
    row.outcome = outcome;
    const auto interval = adversary::wilson_interval(outcome.successes, outcome.trials);
    row.wilson_width = interval.upper - interval.lower;
    row.pass = outcome.frequency <= outcome.bound_value + 3.0 * row.wilson_width;
    return row;
}

json sim_row_json(const SimRow& row) {
    return json{
        {"attack", row.attack},
        {"e", opt_json(row.e)},
        {"p_e", opt_json(row.p_e)},
        {"l", row.l},
        {"s_a", opt_json(row.s_a)},
        {"s_v", opt_json(row.s_v)},
        {"p_bob_origin", opt_json(row.p_bob_origin)},
        {"p_charlie_origin", opt_json(row.p_charlie_origin)},
        {"trials", row.outcome.trials},
        {"successes", row.outcome.successes},
        {"frequency", row.outcome.frequency},
        {"wilson_upper_95", row.outcome.wilson_upper_95},
        {"wilson_width", row.wilson_width},
        {"bound", row.outcome.bound_value},
        {"pass", row.pass},
        {"provenance", "monte-carlo"},
    };
}

} // namespace

CommandResult cmd_simulate(const config::RunConfig& config, const SimulateOptions& options) {
    config.validate();
    const auto seed = config.simulation.seed;
    require(seed.has_value(), "simulate: a seed is required (set simulation.seed or pass --seed)");
    require(!options.flip_grid.empty(), "simulate: flip grid must not be empty");
    for (const double p : options.flip_grid)
        require(std::isfinite(p) && p >= 0.0 && p <= 0.5,
                "simulate: flip rates must be in [0, 0.5]");

    const auto setup = derive_setup(config);
    const double e = setup.params.inputs.e;
    const double p_e = setup.params.eve.p_e;
    const double s_a = options.s_a_override.value_or(setup.params.thresholds.s_a);
    const double s_v = options.s_v_override.value_or(setup.params.thresholds.s_v);
    require(e < s_a, "simulate: abort bound undefined (s_a must exceed e)");
    require(s_a < s_v, "simulate: thresholds must satisfy s_a < s_v");
    require(s_v < p_e, "simulate: forging bound undefined (s_v must stay below P_e)");

    // The repudiation model swaps exact halves, so size the string even.
    const std::int64_t l = setup.params.l + (setup.params.l % 2);
    const auto trials = config.simulation.trials;
    const int workers = config.simulation.workers;

    const auto honest = adversary::simulate_honest_abort(
        e, l, s_a, trials, Rng::derive(*seed, "simulate/honest"), workers);
    const auto forge = adversary::simulate_forge(p_e, l, s_v, trials,
                                                 Rng::derive(*seed, "simulate/forge"), workers);
    const auto sweep =
        adversary::sweep_repudiation(e, l, s_a, s_v, options.flip_grid, trials,
                                     Rng::derive(*seed, "simulate/repudiation"), workers);

    std::vector<SimRow> rows;
    {
        auto row = make_row("honest_abort", l, honest);
        row.e = e;
        row.s_a = s_a;
        rows.push_back(std::move(row));
    }
    {
        auto row = make_row("forge", l, forge);
        row.p_e = p_e;
        row.s_v = s_v;
        rows.push_back(std::move(row));
    }
    for (const auto& point : sweep.points) {
        auto row = make_row("repudiation", l, point.outcome);
        row.e = e;
        row.s_a = s_a;
        row.s_v = s_v;
        row.p_bob_origin = point.strategy.p_bob_origin;
        row.p_charlie_origin = point.strategy.p_charlie_origin;
        rows.push_back(std::move(row));
    }

    bool all_pass = true;
    for (const auto& row : rows) all_pass = all_pass && row.pass;

    CommandResult result;
    result.exit_code = all_pass ? 0 : 2;
    if (is_csv(config)) {
        result.output += csv_line({"attack", "e", "p_e", "l", "s_a", "s_v", "p_bob_origin",
                                   "p_charlie_origin", "trials", "successes", "frequency",
                                   "wilson_upper_95", "bound", "pass", "provenance"});
        for (const auto& row : rows) {
            result.output += csv_line({row.attack, cell(row.e), cell(row.p_e), cell(row.l),
                                       cell(row.s_a), cell(row.s_v), cell(row.p_bob_origin),
                                       cell(row.p_charlie_origin), cell(row.outcome.trials),
                                       cell(row.outcome.successes), cell(row.outcome.frequency),
                                       cell(row.outcome.wilson_upper_95),
                                       cell(row.outcome.bound_value), cell(row.pass),
                                       "monte-carlo"});
        }
        return result;
    }

    json report;
    report["command"] = "simulate";
    report["seed"] = *seed;
    report["trials"] = trials;
    report["workers"] = workers;
    report["l"] = l;
    report["all_pass"] = all_pass;
    report["repudiation_best"] = json{
        {"p_bob_origin", sweep.best.strategy.p_bob_origin},
        {"p_charlie_origin", sweep.best.strategy.p_charlie_origin},
        {"frequency", sweep.best.outcome.frequency},
    };
    report["rows"] = json::array();
    for (const auto& row : rows) report["rows"].push_back(sim_row_json(row));
    result.output = render_json(report);
    return result;
}

} // namespace qds::commands
