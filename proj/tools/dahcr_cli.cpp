// Command-line front end: dataset generation, embedding pretraining,
// training, evaluation, plotting and an interactive session.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dahcr/errors.hpp"
#include "dahcr/harness.hpp"

namespace fs = std::filesystem;
using namespace dahcr;

namespace {

struct CommonData {
    std::string data_dir;
    Catalog catalog;
    DatasetSplit split;
};

CommonData load_data(const std::string& dir, bool need_split) {
    CommonData d;
    d.data_dir = dir;
    d.catalog = load_catalog(dir);
    if (has_split(dir)) {
        d.split = load_split(dir, d.catalog);
    } else if (need_split) {
        throw ValidationError(dir + ": split.json required for this command");
    }
    return d;
}

ExperimentConfig resolve_config(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
    ExperimentConfig config =
        config_path.empty() ? default_experiment() : load_experiment_config(config_path);
    for (const auto& o : overrides) apply_override(config, o);
    return config;
}

int run(int argc, char** argv) {
    CLI::App app{"director-actor conversational recommender laboratory"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    SynthConfig synth;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--users", synth.users, "number of users");
    gen->add_option("--items", synth.items, "number of items");
    gen->add_option("--attrs", synth.attributes, "number of attributes");
    gen->add_option("--attrs-per-item-min", synth.attrs_per_item.first);
    gen->add_option("--attrs-per-item-max", synth.attrs_per_item.second);
    gen->add_option("--interactions-min", synth.interactions_per_user.first);
    gen->add_option("--interactions-max", synth.interactions_per_user.second);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "pretrain node embeddings on the training graph");
    std::string pre_data, pre_out;
    int pre_epochs = 100;
    std::uint64_t pre_seed = 1;
    pre->add_option("--data", pre_data, "dataset directory")->required();
    pre->add_option("--out", pre_out, "embedding output file")->required();
    pre->add_option("--epochs", pre_epochs, "training epochs");
    pre->add_option("--seed", pre_seed, "seed");

    // train
    auto* tr = app.add_subcommand("train", "train the hierarchical agent");
    std::string tr_data, tr_config, tr_out;
    std::uint64_t tr_seed = 1;
    std::vector<std::string> tr_overrides;
    bool tr_quiet = false;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--seed", tr_seed, "seed");
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--set", tr_overrides, "config override, section.key=value");
    tr->add_flag("--quiet", tr_quiet, "suppress progress lines");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    std::string ev_data, ev_ckpt, ev_out;
    std::size_t ev_episodes = 0;
    std::uint64_t ev_seed = 1;
    int ev_threads = 1;
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--episodes", ev_episodes, "episode cap (0 = all test pairs)");
    ev->add_option("--seed", ev_seed, "seed");
    ev->add_option("--out", ev_out, "directory for report + per-episode JSONL");
    ev->add_option("--threads", ev_threads, "evaluation worker threads");

    // play
    auto* pl = app.add_subcommand("play", "interactive session; you answer for the simulator");
    std::string pl_data, pl_ckpt;
    std::int64_t pl_user = -1, pl_target = -1;
    std::uint64_t pl_seed = 1;
    pl->add_option("--data", pl_data, "dataset directory")->required();
    pl->add_option("--checkpoint", pl_ckpt, "checkpoint file")->required();
    pl->add_option("--user", pl_user, "user id (default: random)");
    pl->add_option("--target", pl_target, "target item id used to seed the first attribute");
    pl->add_option("--seed", pl_seed, "seed");

    // plot
    auto* plt = app.add_subcommand("plot", "render SVG curves from a training metrics CSV");
    std::string plt_in, plt_out;
    plt->add_option("--in", plt_in, "metrics CSV")->required();
    plt->add_option("--out", plt_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        auto result = generate_synthetic(synth, gen_seed);
        save_catalog(result.catalog, gen_out);
        save_split(result.split, gen_out);
        std::cout << "wrote " << gen_out << ": " << result.catalog.num_users << " users, "
                  << result.catalog.num_items << " items, " << result.catalog.num_attributes
                  << " attributes, " << result.catalog.interactions.size() << " interactions\n";
        return 0;
    }
    if (pre->parsed()) {
        CommonData d = load_data(pre_data, /*need_split=*/true);
        TransEConfig tc;
        tc.epochs = pre_epochs;
        auto triples = build_kg_triples(d.catalog, d.split);
        EmbeddingTable table = transe_train(d.catalog.num_nodes(),
                                            static_cast<Id>(d.catalog.relation_names.size()),
                                            triples, tc, pre_seed);
        save_embeddings(table, pre_out);
        std::cout << "wrote " << pre_out << " (" << table.entities.rows << " entities)\n";
        return 0;
    }
    if (tr->parsed()) {
        CommonData d = load_data(tr_data, /*need_split=*/true);
        ExperimentConfig config = resolve_config(tr_config, tr_overrides);
        TrainResult result = train_experiment(config, d.catalog, d.split, tr_seed, tr_out,
                                              tr_quiet ? nullptr : &std::cerr);
        std::cout << "best valid sr15 " << result.best_valid_sr15 << "\n"
                  << "metrics csv " << result.csv_path << "\n"
                  << "checkpoints " << result.best_checkpoint << " " << result.final_checkpoint
                  << "\n";
        return 0;
    }
    if (ev->parsed()) {
        CommonData d = load_data(ev_data, /*need_split=*/true);
        std::string trace;
        if (!ev_out.empty()) {
            fs::create_directories(ev_out);
            trace = (fs::path(ev_out) / "episodes.jsonl").string();
        }
        MetricsReport report = evaluate_checkpoint(ev_ckpt, d.catalog, d.split.test, ev_episodes,
                                                   ev_seed, trace, ev_threads);
        std::cout << "episodes " << report.episodes << "\n";
        for (int t : {4, 9, 14}) {
            std::cout << "sr@" << t + 1 << " " << report.sr[static_cast<std::size_t>(t)] << "\n";
        }
        std::cout << "at " << report.at << "\nhdcg " << report.hdcg << "\nfingerprint "
                  << report.config_fingerprint << "\n";
        if (!ev_out.empty()) {
            std::ofstream rep(fs::path(ev_out) / "report.json", std::ios::binary);
            rep << "{\"episodes\":" << report.episodes << ",\"sr15\":" << report.sr[14]
                << ",\"at\":" << report.at << ",\"hdcg\":" << report.hdcg << "}\n";
        }
        return 0;
    }
    if (pl->parsed()) {
        CommonData d = load_data(pl_data, /*need_split=*/false);
        CheckpointState st = load_checkpoint(pl_ckpt);
        PolicyNetworks nets{std::move(st.online), std::move(st.target), st.config.agent};
        Rng rng(pl_seed);
        Id user = pl_user >= 0 ? static_cast<Id>(pl_user)
                               : static_cast<Id>(rng.next_index(d.catalog.num_users));
        Id target = pl_target >= 0 ? static_cast<Id>(pl_target)
                                   : static_cast<Id>(rng.next_index(d.catalog.num_items));
        EpisodeLog log = play(std::cin, std::cout, d.catalog, nets, user, target, pl_seed,
                              st.config.env);
        std::cout << "turns played: " << log.turns.size() << "\n";
        return 0;
    }
    if (plt->parsed()) {
        export_plots(plt_in, plt_out);
        std::cout << "wrote plots to " << plt_out << "\n";
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
