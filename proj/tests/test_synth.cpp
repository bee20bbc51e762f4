#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "inslen/error.hpp"
#include "inslen/metrics.hpp"
#include "inslen/pipeline.hpp"
#include "inslen/rng.hpp"
#include "inslen/synth.hpp"
#include "support/oracles.hpp"

using namespace inslen;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

double detector_auroc(const TraceContainer& c, const std::string& detector) {
    const auto run = score_container(c, scores::ScoreConfig{});
    const auto scored = labeled_scores(run.records, detector);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& x : scored) {
        s.push_back(x.score);
        y.push_back(x.label);
    }
    return oracle::auroc(s, y);
}

}  // namespace

TEST_CASE("counter rng") {
    CounterRng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CounterRng c(7);
    CHECK(c.derive(1).next() != c.derive(2).next());
    double lo = 1, hi = 0, sum = 0;
    for (int i = 0; i < 10000; ++i) {
        const double u = c.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
        CHECK(c.below(5) < 5);
        CHECK(c.uniform_open_low() > 0.0);
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(std::abs(sum / 10000 - 0.5) < 0.02);
}

TEST_CASE("same seed gives byte-identical containers") {
    const auto base = fs::temp_directory_path() / ("inslen-synth-" + std::to_string(::getpid()));
    synth::SynthConfig cfg;
    cfg.n_samples = 10;
    write_container(synth::generate(cfg), base / "a");
    write_container(synth::generate(cfg), base / "b");
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), base / "a");
        CHECK(slurp(e.path()) == slurp(base / "b" / rel));
    }
    cfg.seed = 43;
    CHECK_FALSE(synth::generate(cfg) == synth::generate(synth::SynthConfig{.n_samples = 10}));
    fs::remove_all(base);
}

TEST_CASE("generator contract") {
    synth::SynthConfig cfg;
    cfg.n_samples = 300;  // 1200 objects
    const auto c = synth::generate(cfg);
    CHECK(validate(c).empty());
    std::size_t real = 0, total = 0;
    for (const auto& s : c.samples) {
        CHECK(s.instruction.layer == synth::instruction_layer(cfg));
        CHECK(s.images.at(0).layer == synth::image_layer(cfg));
        for (const auto& o : s.objects) {
            ++total;
            if (o.label == Label::real) ++real;
        }
    }
    CHECK(total == 1200);
    CHECK(std::abs(static_cast<double>(real) / total - cfg.prevalence) <= 0.03);

    // W rows are unit-norm
    for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
        double n = 0;
        for (float x : c.unembedding.row(v)) n += static_cast<double>(x) * x;
        CHECK(std::abs(n - 1.0) < 1e-6);
    }
}

TEST_CASE("config checks") {
    for (auto mutate : std::vector<void (*)(synth::SynthConfig&)>{
             [](synth::SynthConfig& c) { c.prevalence = 1.0; }, [](synth::SynthConfig& c) { c.n_samples = 0; },
             [](synth::SynthConfig& c) { c.instr_signal = -1; },
             [](synth::SynthConfig& c) { c.objects_per_sample = 65; },
             [](synth::SynthConfig& c) { c.image_cluster = 1000; }}) {
        synth::SynthConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(synth::generate(cfg), ParameterError);
    }
}

TEST_CASE("planted instruction signal with an uninformative image channel") {
    synth::SynthConfig cfg;
    cfg.n_samples = 250;
    cfg.instr_signal = 3;
    cfg.image_signal = cfg.distractor_noise = 1;
    const auto c = synth::generate(cfg);
    CHECK(detector_auroc(c, "cafe") >= 0.95);
    CHECK(detector_auroc(c, "internal_conf") <= 0.65);
}

TEST_CASE("cafe auroc grows with the planted signal") {
    const std::vector<double> grid{0.0, 0.25, 0.5, 1.0, 2.0};
    std::vector<double> mean(grid.size(), 0.0);
    for (std::uint64_t seed : {1, 2, 3}) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            synth::SynthConfig cfg;
            cfg.seed = seed;
            cfg.n_samples = 100;
            cfg.instr_signal = grid[i];
            mean[i] += detector_auroc(synth::generate(cfg), "cafe") / 3;
        }
    }
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(mean[i] >= mean[i - 1]);
}
