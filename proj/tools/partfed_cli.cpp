#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "partfed/errors.hpp"
#include "partfed/runner.hpp"
#include "partfed/scenario.hpp"

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw partfed::IoError("cannot write " + path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw partfed::IoError("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// For a multi-variant preset "out.csv" becomes "out-<variant>.csv".
std::string variant_path(const std::string& out, const std::string& variant) {
    const std::size_t dot = out.rfind('.');
    if (dot == std::string::npos || out.find('/', dot) != std::string::npos)
        return out + "-" + variant;
    return out.substr(0, dot) + "-" + variant + out.substr(dot);
}

int run_command(const std::string& config_path, const std::string& preset_name,
                const std::string& out_path, const std::vector<std::string>& overrides,
                bool per_agent) {
    std::vector<std::string> all_overrides = overrides;
    if (per_agent) all_overrides.push_back("metrics.per_agent = true");

    std::vector<std::pair<std::string, partfed::ScenarioConfig>> runs;
    if (!preset_name.empty()) {
        const partfed::Preset* preset = partfed::find_preset(preset_name);
        if (!preset) throw partfed::ConfigError("unknown preset: " + preset_name);
        for (const auto& [variant, text] : preset->variants)
            runs.emplace_back(variant, partfed::config_from_text(text, all_overrides));
    } else if (!config_path.empty()) {
        runs.emplace_back("", partfed::load_config_file(config_path, all_overrides));
    } else {
        throw partfed::ConfigError("run needs --config or --preset");
    }

    std::vector<partfed::RunResult> results;
    for (const auto& [variant, cfg] : runs) {
        partfed::RunResult result = partfed::run_scenario(cfg);
        std::string path = out_path;
        if (!path.empty() && runs.size() > 1) path = variant_path(path, variant);
        if (!path.empty()) {
            write_file(path, result.csv);
            std::cout << cfg.name << ": " << path << "  final_accuracy="
                      << result.final_accuracy << "\n";
        } else {
            std::cout << result.csv;
        }
        results.push_back(std::move(result));
    }

    // Paired decentralized/centralized presets print the accuracy-gap
    // summary directly.
    if (results.size() == 2 && runs[0].first == "p2p" && runs[1].first == "central") {
        const partfed::GapReport gap = partfed::compare_metrics(results[0].csv, results[1].csv);
        std::cout << "max_abs_gap=" << gap.max_abs_gap << " final_gap=" << gap.final_gap << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, preset_name, out_path;
    std::vector<std::string> overrides;
    uint64_t seed_override = 0;
    bool seed_set = false, per_agent = false;

    CLI::App* run = app.add_subcommand("run", "Run a scenario and emit metrics CSV");
    run->add_option("--config", config_path, "Scenario config file");
    run->add_option("--preset", preset_name, "Built-in preset name (see 'presets')");
    run->add_option("--out", out_path, "Output CSV path (stdout when omitted)");
    run->add_option("--seed", seed_override, "Override every seed in the scenario")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_flag("--per-agent", per_agent, "Emit per-agent metric rows");
    run->add_option("overrides", overrides, "key=value config overrides");

    std::string csv_a, csv_b, report_out;
    CLI::App* cmp = app.add_subcommand("compare", "Per-round accuracy gap between two runs");
    cmp->add_option("a", csv_a, "First metrics CSV")->required();
    cmp->add_option("b", csv_b, "Second metrics CSV")->required();
    cmp->add_option("--out", report_out, "Write the gap report here");

    CLI::App* lst = app.add_subcommand("presets", "List built-in presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (seed_set) {
                overrides.push_back("model.seed = " + std::to_string(seed_override));
                overrides.push_back("train.seed = " + std::to_string(seed_override + 1));
                overrides.push_back("dataset.seed = " + std::to_string(seed_override + 2));
                overrides.push_back("net.seed = " + std::to_string(seed_override + 3));
            }
            return run_command(config_path, preset_name, out_path, overrides, per_agent);
        }
        if (cmp->parsed()) {
            const partfed::GapReport gap =
                partfed::compare_metrics(read_file(csv_a), read_file(csv_b));
            const std::string text = gap.to_text();
            if (!report_out.empty()) write_file(report_out, text);
            std::cout << text;
            return 0;
        }
        if (lst->parsed()) {
            for (const partfed::Preset& p : partfed::presets()) {
                std::cout << p.name << " (" << p.variants.size() << " run"
                          << (p.variants.size() > 1 ? "s" : "") << "): " << p.description << "\n";
            }
            return 0;
        }
    } catch (const partfed::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const partfed::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
