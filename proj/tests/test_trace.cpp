#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "inslen/error.hpp"
#include "inslen/synth.hpp"
#include "inslen/trace.hpp"
#include "json.hpp"
#include "support/gen.hpp"

using namespace inslen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("inslen-test-" + std::to_string(::getpid()) + "-" + name)) {
        fs::remove_all(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

nlohmann::json read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    return nlohmann::json::parse(in);
}

void write_manifest(const fs::path& dir, const nlohmann::json& m) {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << m.dump(1);
}

TraceContainer fixture(std::size_t n = 5) {
    gen::Gen g(51);
    auto c = g.container(12, 4, n);
    c.synonyms = SynonymMap{{"puppy", "dog"}};
    c.samples[0].ground_truth_objects = std::vector<std::string>{"dog", "cat"};
    c.samples[0].generated_text = "A dog.";
    c.samples[0].image_ref = "img/0001.jpg";
    return c;
}

}  // namespace

TEST_CASE("write then open returns an equal container") {
    TempDir dir("roundtrip");
    const auto c = fixture();
    write_container(c, dir.path);
    CHECK(fs::exists(dir.path / "manifest.json"));
    CHECK_FALSE(fs::exists(dir.path / ".inslen-partial"));
    const auto back = open_container(dir.path);
    CHECK(back == c);
    CHECK(read_manifest(dir.path)["format"] == "inslen-trace/1");
}

TEST_CASE("f16 containers round-trip values that are representable in half precision") {
    TempDir dir("f16");
    synth::SynthConfig cfg;
    cfg.n_samples = 4;
    cfg.dtype = DType::f16;
    const auto c = synth::generate(cfg);
    write_container(c, dir.path);
    const auto back = open_container(dir.path);
    CHECK(back == c);
    CHECK(fs::file_size(dir.path / "tensors" / "unembedding.bin") == cfg.vocab_size * cfg.hidden_dim * 2);
}

TEST_CASE("empty sample list") {
    TempDir dir("empty");
    gen::Gen g(52);
    const ModelCard card{"m", 6, 3, 4, DType::f32};
    write_container(card, g.tensor(6, 3), std::span<const SampleTrace>{}, dir.path);
    const auto back = open_container(dir.path);
    CHECK(back.samples.empty());
    CHECK(validate(back).empty());
}

TEST_CASE("shape mismatch names the sample and writes nothing") {
    TempDir dir("shape");
    auto c = fixture();
    gen::Gen g(53);
    c.samples[2].instruction.embeddings = g.tensor(c.samples[2].instruction.count(), 5);
    try {
        write_container(c, dir.path);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.sample_id() == c.samples[2].sample_id);
    }
    CHECK_FALSE(fs::exists(dir.path / "manifest.json"));
}

TEST_CASE("opening damaged containers") {
    TempDir dir("damage");
    const auto c = fixture();

    SUBCASE("missing manifest") {
        fs::create_directories(dir.path);
        CHECK_THROWS_AS(open_container(dir.path), FormatError);
    }
    SUBCASE("unknown major version") {
        write_container(c, dir.path);
        auto m = read_manifest(dir.path);
        m["format"] = "inslen-trace/2";
        write_manifest(dir.path, m);
        CHECK_THROWS_AS(open_container(dir.path), FormatError);
    }
    SUBCASE("truncated blob") {
        write_container(c, dir.path);
        const auto blob = dir.path / "tensors" / "sample_000003.bin";
        fs::resize_file(blob, fs::file_size(blob) - 4);
        try {
            open_container(dir.path);
            FAIL("expected CorruptionError");
        } catch (const CorruptionError& e) {
            CHECK(std::string(e.what()).find("sample_000003.bin") != std::string::npos);
        }
    }
    SUBCASE("card vocabulary larger than the stored matrix") {
        gen::Gen g(54);
        const ModelCard card{"m", 7, 3, 4, DType::f32};
        write_container(card, g.tensor(7, 3), std::span<const SampleTrace>{}, dir.path);
        auto m = read_manifest(dir.path);
        m["card"]["vocab_size"] = 8;
        write_manifest(dir.path, m);
        CHECK_THROWS_AS(open_container(dir.path), CorruptionError);

        // declaring the tensor itself as 8 x 3 overruns the 7 x 3 x 4-byte blob
        m["unembedding"]["shape"] = {8, 3};
        write_manifest(dir.path, m);
        CHECK(fs::file_size(dir.path / "tensors" / "unembedding.bin") == 7 * 3 * 4);
        CHECK_THROWS_AS(open_container(dir.path), CorruptionError);
    }
    SUBCASE("partial write marker") {
        write_container(c, dir.path);
        std::ofstream(dir.path / ".inslen-partial") << "";
        CHECK_THROWS_AS(open_container(dir.path), FormatError);
    }
}

TEST_CASE("validation") {
    synth::SynthConfig cfg;
    CHECK(validate(synth::generate(cfg)).empty());

    auto c = fixture();
    CHECK(validate(c).empty());

    SUBCASE("positive nll") {
        for (auto& s : c.samples) {
            if (s.objects.empty()) continue;
            s.objects[0].nll = 0.5;
            break;
        }
        const auto r = validate(c);
        REQUIRE(r.size() == 1);
        CHECK(r[0].rule == "nll ≤ 0");
    }
    SUBCASE("duplicate sample id") {
        c.samples[3].sample_id = c.samples[1].sample_id;
        const auto r = validate(c);
        REQUIRE(r.size() == 1);
        CHECK(r[0].rule == "sample_id unique");
    }
}

TEST_CASE("lazy loading reads only what is touched") {
    TempDir dir("lazy");
    synth::SynthConfig cfg;
    cfg.n_samples = 30;
    write_container(synth::generate(cfg), dir.path);
    const auto manifest_bytes = fs::file_size(dir.path / "manifest.json");

    const auto c = open_container(dir.path);
    CHECK(c.bytes_read() == manifest_bytes);
    CHECK_FALSE(c.samples[7].instruction.embeddings.loaded());

    (void)c.samples[7].instruction.embeddings.row(0);
    const auto expect = manifest_bytes + cfg.n_instruction_tokens * cfg.hidden_dim * 4;
    CHECK(c.bytes_read() == expect);
    // a second access does not read again
    (void)c.samples[7].instruction.embeddings.data();
    CHECK(c.bytes_read() == expect);
    CHECK_FALSE(c.samples[8].instruction.embeddings.loaded());
}

TEST_CASE("concurrent reads of a shared container") {
    TempDir dir("threads");
    synth::SynthConfig cfg;
    cfg.n_samples = 16;
    const auto original = synth::generate(cfg);
    write_container(original, dir.path);
    const auto c = open_container(dir.path);
    std::vector<double> sums(8, 0.0);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < sums.size(); ++t) {
            pool.emplace_back([&, t] {
                for (const auto& s : c.samples) {
                    for (float x : s.images[0].embeddings.data()) sums[t] += x;
                }
            });
        }
    }
    for (double s : sums) CHECK(s == sums[0]);
    CHECK(c == original);
}

TEST_CASE("layer resolution") {
    CHECK(resolve_layer(-1, 32) == 32);
    CHECK(resolve_layer(-2, 32) == 31);
    CHECK(resolve_layer(5, 32) == 5);
    CHECK(resolve_layer(-33, 32) == 0);
    CHECK_THROWS_AS(resolve_layer(-34, 32), ConfigError);
}
