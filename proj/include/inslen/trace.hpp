#pragma once

// Data model and on-disk container for extracted model internals.
//
// A container is a directory holding `manifest.json` (format `inslen-trace/1`)
// and raw little-endian tensor blobs under `tensors/`. Blobs are memory-mapped
// on open and each tensor is materialized only when first accessed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace inslen {

inline constexpr std::string_view kFormatVersion = "inslen-trace/1";

enum class DType { f32, f16 };

std::string_view to_string(DType dtype);
DType parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype);

namespace detail {
struct TensorStorage;
}

/// Immutable row-major 2-D tensor of f32 values.
///
/// Copies share storage. A tensor opened from a container is backed by a
/// mapped blob and is loaded (and, for f16, promoted to f32) on first access;
/// loading is thread-safe.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, std::vector<float> data);
    Tensor(std::size_t rows, std::size_t cols, std::shared_ptr<detail::TensorStorage> storage);

    static Tensor row_vector(std::vector<float> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }
    bool empty() const noexcept { return size() == 0; }

    std::span<const float> data() const;
    std::span<const float> row(std::size_t r) const;
    float at(std::size_t r, std::size_t c) const { return data()[r * cols_ + c]; }

    /// True once the values are resident (always true for owning tensors).
    bool loaded() const noexcept;

    /// Shape and bit-pattern equality.
    friend bool operator==(const Tensor& a, const Tensor& b);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::shared_ptr<detail::TensorStorage> storage_;
};

struct ModelCard {
    std::string model_id;
    std::size_t vocab_size = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_layers = 0;
    DType dtype = DType::f32;

    friend bool operator==(const ModelCard&, const ModelCard&) = default;
};

/// Resolves a layer index. Non-negative values are taken as-is; negative
/// values count back from the last hidden state, so -1 is `num_layers` and
/// -2 the penultimate layer. Throws ConfigError below layer 0.
int resolve_layer(int layer, std::size_t num_layers);

struct InstructionBlock {
    int layer = 0;
    std::vector<std::int64_t> token_ids;
    Tensor embeddings;  // count x hidden_dim

    std::size_t count() const noexcept { return embeddings.rows(); }
    friend bool operator==(const InstructionBlock&, const InstructionBlock&) = default;
};

struct ImageBlock {
    int layer = 0;
    Tensor embeddings;  // count x hidden_dim

    std::size_t count() const noexcept { return embeddings.rows(); }
    friend bool operator==(const ImageBlock&, const ImageBlock&) = default;
};

enum class Label { real, hallucinated, unknown };

std::string_view to_string(Label label);
Label parse_label(std::string_view name);

struct LayerEmbedding {
    int layer = 0;
    Tensor vector;  // 1 x hidden_dim

    friend bool operator==(const LayerEmbedding&, const LayerEmbedding&) = default;
};

struct ObjectTokenRecord {
    std::int64_t token_id = 0;
    std::string surface;
    std::int64_t position = 0;
    std::vector<LayerEmbedding> embeddings;
    std::optional<double> nll;            // log p(o | y_<j, v), nats
    std::optional<double> entropy_score;  // sum p log p at the decode step, nats
    std::optional<Tensor> var_table;      // row r holds decoder layer r + 1, one column per head
    Label label = Label::unknown;

    /// Embedding at an already-resolved layer, or nullptr.
    const Tensor* embedding_at(int layer) const;
    friend bool operator==(const ObjectTokenRecord&, const ObjectTokenRecord&) = default;
};

struct SampleTrace {
    std::string sample_id;
    InstructionBlock instruction;
    std::vector<ImageBlock> images;
    std::vector<ObjectTokenRecord> objects;
    std::optional<std::vector<std::string>> ground_truth_objects;
    std::optional<std::string> generated_text;
    std::optional<std::string> image_ref;

    /// Image block at an already-resolved layer, or nullptr.
    const ImageBlock* image_at(int layer) const;
    friend bool operator==(const SampleTrace&, const SampleTrace&) = default;
};

using SynonymMap = std::map<std::string, std::string>;

/// Counts tensor bytes pulled in from blobs, plus the manifest itself.
struct IoStats;

struct TraceContainer {
    ModelCard card;
    Tensor unembedding;  // vocab_size x hidden_dim
    std::vector<SampleTrace> samples;
    std::optional<SynonymMap> synonyms;

    /// Bytes read so far through this container (manifest + loaded tensors).
    /// Zero for containers built in memory.
    std::uint64_t bytes_read() const;

    std::shared_ptr<IoStats> io;

    friend bool operator==(const TraceContainer& a, const TraceContainer& b) {
        return a.card == b.card && a.unembedding == b.unembedding && a.samples == b.samples &&
               a.synonyms == b.synonyms;
    }
};

/// Writes a container directory. Every sample is checked against the card
/// before anything is written; a mismatch raises ShapeError naming the sample.
/// On I/O failure the partially written files are removed and the error is
/// rethrown.
void write_container(const ModelCard& card, const Tensor& unembedding,
                     std::span<const SampleTrace> samples, const std::filesystem::path& dest,
                     const std::optional<SynonymMap>& synonyms = std::nullopt);
void write_container(const TraceContainer& container, const std::filesystem::path& dest);

/// Opens a container. Tensor blobs are mapped, not read; every declared
/// tensor is checked against its blob's byte length.
TraceContainer open_container(const std::filesystem::path& src);

struct Violation {
    std::string sample_id;  // empty for container-level violations
    std::string field;
    std::string rule;

    friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

/// Checks every data-model invariant. Violations are returned, never thrown.
ValidationReport validate(const TraceContainer& container);

}  // namespace inslen
