#include "inslen/trace.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "half.hpp"
#include "inslen/error.hpp"
#include "json.hpp"
#include "mapped_file.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace inslen {

struct IoStats {
    std::atomic<std::uint64_t> bytes{0};
};

namespace detail {

struct TensorStorage {
    std::vector<float> owned;
    const float* ptr = nullptr;
    std::size_t count = 0;

    std::shared_ptr<const MappedFile> file;
    std::size_t offset = 0;
    DType dtype = DType::f32;
    std::shared_ptr<IoStats> stats;

    std::once_flag once;
    std::atomic<bool> ready{false};

    std::span<const float> get() {
        if (!ready.load(std::memory_order_acquire)) {
            std::call_once(once, [this] { load(); });
        }
        return {ptr, count};
    }

    void load() {
        const std::byte* src = file->data() + offset;
        if (dtype == DType::f32) {
            if constexpr (std::endian::native == std::endian::little) {
                if (reinterpret_cast<std::uintptr_t>(src) % alignof(float) == 0) {
                    ptr = reinterpret_cast<const float*>(src);
                }
            }
            if (ptr == nullptr) {
                owned.resize(count);
                for (std::size_t i = 0; i < count; ++i) {
                    std::uint32_t bits = 0;
                    for (int b = 0; b < 4; ++b) {
                        bits |= static_cast<std::uint32_t>(src[i * 4 + b]) << (8 * b);
                    }
                    owned[i] = std::bit_cast<float>(bits);
                }
                ptr = owned.data();
            }
        } else {
            owned.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto bits = static_cast<std::uint16_t>(static_cast<unsigned>(src[i * 2]) |
                                                             (static_cast<unsigned>(src[i * 2 + 1]) << 8));
                owned[i] = half_to_float(bits);
            }
            ptr = owned.data();
        }
        if (stats) {
            stats->bytes += count * dtype_size(dtype);
        }
        ready.store(true, std::memory_order_release);
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// enums

std::string_view to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f16"; }

DType parse_dtype(std::string_view name) {
    if (name == "f32") return DType::f32;
    if (name == "f16") return DType::f16;
    throw FormatError("unknown dtype '" + std::string(name) + "'");
}

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 2; }

std::string_view to_string(Label label) {
    switch (label) {
        case Label::real: return "real";
        case Label::hallucinated: return "hallucinated";
        case Label::unknown: break;
    }
    return "unknown";
}

Label parse_label(std::string_view name) {
    if (name == "real") return Label::real;
    if (name == "hallucinated") return Label::hallucinated;
    if (name == "unknown") return Label::unknown;
    throw FormatError("unknown label '" + std::string(name) + "'");
}

int resolve_layer(int layer, std::size_t num_layers) {
    if (layer >= 0) return layer;
    const int resolved = static_cast<int>(num_layers) + 1 + layer;
    if (resolved < 0) {
        throw ConfigError("layer " + std::to_string(layer) + " is out of range for " + std::to_string(num_layers) +
                          " layers");
    }
    return resolved;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<float> data) : rows_(rows), cols_(cols) {
    if (data.size() != rows * cols) {
        throw InputError("tensor data holds " + std::to_string(data.size()) + " values, shape needs " +
                         std::to_string(rows * cols));
    }
    storage_ = std::make_shared<detail::TensorStorage>();
    storage_->owned = std::move(data);
    storage_->ptr = storage_->owned.data();
    storage_->count = rows * cols;
    storage_->ready.store(true);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::shared_ptr<detail::TensorStorage> storage)
    : rows_(rows), cols_(cols), storage_(std::move(storage)) {}

Tensor Tensor::row_vector(std::vector<float> data) {
    const std::size_t n = data.size();
    return Tensor(1, n, std::move(data));
}

std::span<const float> Tensor::data() const {
    if (!storage_) return {};
    return storage_->get();
}

std::span<const float> Tensor::row(std::size_t r) const {
    if (r >= rows_) {
        throw IndexError("row " + std::to_string(r) + " out of range for " + std::to_string(rows_) + " rows");
    }
    return data().subspan(r * cols_, cols_);
}

bool Tensor::loaded() const noexcept { return !storage_ || storage_->ready.load(std::memory_order_acquire); }

bool operator==(const Tensor& a, const Tensor& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) return false;
    if (a.storage_ == b.storage_) return true;
    const auto da = a.data();
    const auto db = b.data();
    return std::memcmp(da.data(), db.data(), da.size_bytes()) == 0;
}

const Tensor* ObjectTokenRecord::embedding_at(int layer) const {
    for (const auto& e : embeddings) {
        if (e.layer == layer) return &e.vector;
    }
    return nullptr;
}

const ImageBlock* SampleTrace::image_at(int layer) const {
    for (const auto& b : images) {
        if (b.layer == layer) return &b;
    }
    return nullptr;
}

std::uint64_t TraceContainer::bytes_read() const { return io ? io->bytes.load() : 0; }

// ---------------------------------------------------------------------------
// writing

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kPartialMarker = ".inslen-partial";
constexpr std::size_t kAlign = 64;

void check_sample_shapes(const ModelCard& card, const SampleTrace& s) {
    const auto d = card.hidden_dim;
    auto fail = [&](const std::string& what) { throw ShapeError(s.sample_id, what); };
    auto check_id = [&](std::int64_t id, const std::string& where) {
        if (id < 0 || static_cast<std::uint64_t>(id) >= card.vocab_size) {
            fail(where + " token_id " + std::to_string(id) + " outside vocabulary of " +
                 std::to_string(card.vocab_size));
        }
    };

    const auto& ins = s.instruction;
    if (ins.embeddings.cols() != d) {
        fail("instruction embedding width " + std::to_string(ins.embeddings.cols()) + " != hidden_dim " +
             std::to_string(d));
    }
    if (ins.token_ids.size() != ins.count()) {
        fail("instruction has " + std::to_string(ins.token_ids.size()) + " token ids for " +
             std::to_string(ins.count()) + " embeddings");
    }
    for (auto id : ins.token_ids) check_id(id, "instruction");
    for (const auto& img : s.images) {
        if (img.embeddings.cols() != d) {
            fail("image embedding width " + std::to_string(img.embeddings.cols()) + " at layer " +
                 std::to_string(img.layer) + " != hidden_dim " + std::to_string(d));
        }
    }
    for (const auto& o : s.objects) {
        check_id(o.token_id, "object");
        for (const auto& e : o.embeddings) {
            if (e.vector.rows() != 1 || e.vector.cols() != d) {
                fail("object '" + o.surface + "' embedding at layer " + std::to_string(e.layer) +
                     " has shape " + std::to_string(e.vector.rows()) + "x" + std::to_string(e.vector.cols()) +
                     ", expected 1x" + std::to_string(d));
            }
        }
    }
}

class BlobWriter {
public:
    BlobWriter(const fs::path& root, std::string rel, DType dtype) : rel_(std::move(rel)), dtype_(dtype) {
        out_.open(root / rel_, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error("cannot create blob '" + (root / rel_).string() + "'");
    }

    json put(const Tensor& t) {
        const std::size_t pad = (kAlign - pos_ % kAlign) % kAlign;
        if (pad != 0) {
            static const char zeros[kAlign] = {};
            out_.write(zeros, static_cast<std::streamsize>(pad));
            pos_ += pad;
        }
        const std::size_t offset = pos_;
        const auto values = t.data();
        std::vector<unsigned char> buf(values.size() * dtype_size(dtype_));
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (dtype_ == DType::f32) {
                const auto bits = std::bit_cast<std::uint32_t>(values[i]);
                for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
            } else {
                const auto bits = detail::float_to_half(values[i]);
                buf[i * 2] = static_cast<unsigned char>(bits & 0xff);
                buf[i * 2 + 1] = static_cast<unsigned char>(bits >> 8);
            }
        }
        out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        pos_ += buf.size();
        if (!out_) throw Error("write failed on blob '" + rel_ + "'");
        return json{{"file", rel_},
                    {"dtype", std::string(to_string(dtype_))},
                    {"shape", {t.rows(), t.cols()}},
                    {"byte_offset", offset}};
    }

    void close() {
        out_.close();
        if (!out_) throw Error("closing blob '" + rel_ + "' failed");
    }

private:
    std::string rel_;
    DType dtype_;
    std::ofstream out_;
    std::size_t pos_ = 0;
};

std::string sample_blob_name(std::size_t index) {
    std::ostringstream os;
    os << "tensors/sample_";
    os.width(6);
    os.fill('0');
    os << index << ".bin";
    return os.str();
}

json write_sample(const SampleTrace& s, BlobWriter& blob) {
    json js;
    js["sample_id"] = s.sample_id;
    js["instruction"] = {{"layer", s.instruction.layer},
                         {"token_ids", s.instruction.token_ids},
                         {"embeddings", blob.put(s.instruction.embeddings)}};
    json images = json::array();
    for (const auto& img : s.images) {
        images.push_back({{"layer", img.layer}, {"embeddings", blob.put(img.embeddings)}});
    }
    js["images"] = std::move(images);
    json objects = json::array();
    for (const auto& o : s.objects) {
        json jo{{"token_id", o.token_id},
                {"surface", o.surface},
                {"position", o.position},
                {"label", std::string(to_string(o.label))}};
        if (o.nll) jo["nll"] = *o.nll;
        if (o.entropy_score) jo["entropy_score"] = *o.entropy_score;
        json embs = json::array();
        for (const auto& e : o.embeddings) {
            embs.push_back({{"layer", e.layer}, {"vector", blob.put(e.vector)}});
        }
        jo["embeddings"] = std::move(embs);
        if (o.var_table) jo["var_table"] = blob.put(*o.var_table);
        objects.push_back(std::move(jo));
    }
    js["objects"] = std::move(objects);
    if (s.ground_truth_objects) js["ground_truth_objects"] = *s.ground_truth_objects;
    if (s.generated_text) js["generated_text"] = *s.generated_text;
    if (s.image_ref) js["image_ref"] = *s.image_ref;
    return js;
}

}  // namespace

void write_container(const ModelCard& card, const Tensor& unembedding, std::span<const SampleTrace> samples,
                     const fs::path& dest, const std::optional<SynonymMap>& synonyms) {
    if (unembedding.rows() != card.vocab_size || unembedding.cols() != card.hidden_dim) {
        throw ShapeError("", "unembedding shape " + std::to_string(unembedding.rows()) + "x" +
                                 std::to_string(unembedding.cols()) + " does not match card " +
                                 std::to_string(card.vocab_size) + "x" + std::to_string(card.hidden_dim));
    }
    for (const auto& s : samples) check_sample_shapes(card, s);

    std::error_code ec;
    fs::create_directories(dest, ec);
    if (ec) throw Error("cannot create '" + dest.string() + "': " + ec.message());
    const fs::path marker = dest / kPartialMarker;
    {
        std::ofstream m(marker);
        if (!m) throw Error("cannot write into '" + dest.string() + "'");
    }
    fs::remove(dest / kManifest, ec);
    fs::remove_all(dest / "tensors", ec);

    try {
        fs::create_directories(dest / "tensors");
        json manifest;
        manifest["format"] = std::string(kFormatVersion);
        manifest["card"] = {{"model_id", card.model_id},
                            {"vocab_size", card.vocab_size},
                            {"hidden_dim", card.hidden_dim},
                            {"num_layers", card.num_layers},
                            {"dtype", std::string(to_string(card.dtype))}};
        {
            BlobWriter blob(dest, "tensors/unembedding.bin", card.dtype);
            manifest["unembedding"] = blob.put(unembedding);
            blob.close();
        }
        json js = json::array();
        for (std::size_t i = 0; i < samples.size(); ++i) {
            BlobWriter blob(dest, sample_blob_name(i), card.dtype);
            js.push_back(write_sample(samples[i], blob));
            blob.close();
        }
        manifest["samples"] = std::move(js);
        if (synonyms) manifest["synonym_dict"] = *synonyms;

        std::ofstream out(dest / kManifest, std::ios::binary | std::ios::trunc);
        out << manifest.dump(1) << '\n';
        out.close();
        if (!out) throw Error("cannot write manifest in '" + dest.string() + "'");
    } catch (...) {
        fs::remove(dest / kManifest, ec);
        fs::remove_all(dest / "tensors", ec);
        fs::remove(marker, ec);
        throw;
    }
    fs::remove(marker, ec);
}

void write_container(const TraceContainer& c, const fs::path& dest) {
    write_container(c.card, c.unembedding, c.samples, dest, c.synonyms);
}

// ---------------------------------------------------------------------------
// reading

namespace {

class ManifestReader {
public:
    ManifestReader(fs::path root, std::shared_ptr<IoStats> stats) : root_(std::move(root)), stats_(std::move(stats)) {}

    DType dtype = DType::f32;

    Tensor tensor(const json& rec) {
        const auto rel = rec.at("file").get<std::string>();
        const fs::path relp(rel);
        if (relp.is_absolute() || std::any_of(relp.begin(), relp.end(), [](const auto& p) { return p == ".."; })) {
            throw FormatError("tensor file '" + rel + "' escapes the container");
        }
        if (parse_dtype(rec.at("dtype").get<std::string>()) != dtype) {
            throw FormatError("tensor in '" + rel + "' has dtype " + rec.at("dtype").get<std::string>() +
                              ", card declares " + std::string(to_string(dtype)));
        }
        const auto& shape = rec.at("shape");
        if (!shape.is_array() || shape.size() != 2) throw FormatError("tensor in '" + rel + "' is not 2-D");
        const auto rows = shape[0].get<std::uint64_t>();
        const auto cols = shape[1].get<std::uint64_t>();
        const auto offset = rec.at("byte_offset").get<std::uint64_t>();
        if (offset % kAlign != 0) {
            throw CorruptionError("blob '" + rel + "': byte_offset " + std::to_string(offset) +
                                  " is not 64-byte aligned");
        }
        if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
            throw CorruptionError("blob '" + rel + "': declared shape too large");
        }
        const std::uint64_t count = rows * cols;
        const std::uint64_t nbytes = count * dtype_size(dtype);

        auto& entry = files_[rel];
        if (!entry.file) entry.file = std::make_shared<const detail::MappedFile>(root_ / relp);
        if (offset + nbytes > entry.file->size()) {
            throw CorruptionError("blob '" + rel + "' holds " + std::to_string(entry.file->size()) +
                                  " bytes; tensor " + std::to_string(rows) + "x" + std::to_string(cols) +
                                  " at offset " + std::to_string(offset) + " needs " +
                                  std::to_string(offset + nbytes));
        }
        entry.end = std::max<std::uint64_t>(entry.end, offset + nbytes);

        auto storage = std::make_shared<detail::TensorStorage>();
        storage->file = entry.file;
        storage->offset = offset;
        storage->count = count;
        storage->dtype = dtype;
        storage->stats = stats_;
        if (count == 0) storage->ready.store(true);
        return Tensor(rows, cols, std::move(storage));
    }

    /// Every blob must end exactly where its last declared tensor ends.
    void check_extents() const {
        for (const auto& [rel, entry] : files_) {
            if (entry.file->size() != entry.end) {
                throw CorruptionError("blob '" + rel + "' holds " + std::to_string(entry.file->size()) +
                                      " bytes, manifest declares " + std::to_string(entry.end));
            }
        }
    }

private:
    struct FileEntry {
        std::shared_ptr<const detail::MappedFile> file;
        std::uint64_t end = 0;
    };
    fs::path root_;
    std::shared_ptr<IoStats> stats_;
    std::map<std::string, FileEntry> files_;
};

SampleTrace read_sample(const json& js, ManifestReader& reader) {
    SampleTrace s;
    s.sample_id = js.at("sample_id").get<std::string>();
    const auto& ji = js.at("instruction");
    s.instruction.layer = ji.at("layer").get<int>();
    s.instruction.token_ids = ji.at("token_ids").get<std::vector<std::int64_t>>();
    s.instruction.embeddings = reader.tensor(ji.at("embeddings"));
    for (const auto& jimg : js.at("images")) {
        s.images.push_back({jimg.at("layer").get<int>(), reader.tensor(jimg.at("embeddings"))});
    }
    for (const auto& jo : js.at("objects")) {
        ObjectTokenRecord o;
        o.token_id = jo.at("token_id").get<std::int64_t>();
        o.surface = jo.at("surface").get<std::string>();
        o.position = jo.at("position").get<std::int64_t>();
        o.label = parse_label(jo.value("label", std::string("unknown")));
        if (jo.contains("nll")) o.nll = jo["nll"].get<double>();
        if (jo.contains("entropy_score")) o.entropy_score = jo["entropy_score"].get<double>();
        for (const auto& je : jo.at("embeddings")) {
            o.embeddings.push_back({je.at("layer").get<int>(), reader.tensor(je.at("vector"))});
        }
        if (jo.contains("var_table")) o.var_table = reader.tensor(jo["var_table"]);
        s.objects.push_back(std::move(o));
    }
    if (js.contains("ground_truth_objects")) {
        s.ground_truth_objects = js["ground_truth_objects"].get<std::vector<std::string>>();
    }
    if (js.contains("generated_text")) s.generated_text = js["generated_text"].get<std::string>();
    if (js.contains("image_ref")) s.image_ref = js["image_ref"].get<std::string>();
    return s;
}

}  // namespace

TraceContainer open_container(const fs::path& src) {
    const fs::path manifest_path = src / kManifest;
    if (fs::exists(src / kPartialMarker)) {
        throw FormatError("container '" + src.string() + "' is incomplete (partial write marker present)");
    }
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw FormatError("missing manifest '" + manifest_path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    TraceContainer c;
    c.io = std::make_shared<IoStats>();
    c.io->bytes += text.size();

    json m;
    try {
        m = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError("manifest '" + manifest_path.string() + "' is not valid JSON: " + e.what());
    }

    try {
        const auto version = m.at("format").get<std::string>();
        const auto slash = version.find('/');
        if (version.substr(0, slash) != "inslen-trace" || slash == std::string::npos) {
            throw FormatError("unrecognized format '" + version + "'");
        }
        const auto major = version.substr(slash + 1, version.find('.', slash) - slash - 1);
        if (major != "1") throw FormatError("unsupported format major version '" + version + "'");

        const auto& jc = m.at("card");
        c.card.model_id = jc.at("model_id").get<std::string>();
        c.card.vocab_size = jc.at("vocab_size").get<std::size_t>();
        c.card.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
        c.card.num_layers = jc.at("num_layers").get<std::size_t>();
        c.card.dtype = parse_dtype(jc.at("dtype").get<std::string>());

        ManifestReader reader(src, c.io);
        reader.dtype = c.card.dtype;
        c.unembedding = reader.tensor(m.at("unembedding"));
        if (c.unembedding.rows() != c.card.vocab_size || c.unembedding.cols() != c.card.hidden_dim) {
            throw CorruptionError("unembedding tensor is " + std::to_string(c.unembedding.rows()) + "x" +
                                  std::to_string(c.unembedding.cols()) + ", card declares " +
                                  std::to_string(c.card.vocab_size) + "x" + std::to_string(c.card.hidden_dim));
        }
        for (const auto& js : m.at("samples")) c.samples.push_back(read_sample(js, reader));
        if (m.contains("synonym_dict")) c.synonyms = m["synonym_dict"].get<SynonymMap>();
        reader.check_extents();
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest '" + manifest_path.string() + "': " + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// validation

namespace {

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

ValidationReport validate(const TraceContainer& c) {
    ValidationReport report;
    auto add = [&](const std::string& sid, std::string field, std::string rule) {
        report.push_back({sid, std::move(field), std::move(rule)});
    };
    const auto& card = c.card;
    const auto L = static_cast<int>(card.num_layers);
    const auto V = card.vocab_size;
    const auto d = card.hidden_dim;

    if (card.vocab_size < 2) add("", "card.vocab_size", "vocab_size ≥ 2");
    if (card.hidden_dim < 1) add("", "card.hidden_dim", "hidden_dim ≥ 1");
    if (card.num_layers < 1) add("", "card.num_layers", "num_layers ≥ 1");
    if (c.unembedding.rows() != V || c.unembedding.cols() != d) {
        add("", "unembedding", "shape = vocab_size × hidden_dim");
    }
    if (!all_finite(c.unembedding.data())) add("", "unembedding", "entries finite");

    auto check_id = [&](const std::string& sid, const std::string& field, std::int64_t id) {
        if (id < 0 || static_cast<std::uint64_t>(id) >= V) add(sid, field, "token_id < vocab_size");
    };
    auto check_layer = [&](const std::string& sid, const std::string& field, int layer) {
        if (layer < 0 || layer > L) add(sid, field, "layer ∈ [0, num_layers]");
    };

    std::unordered_set<std::string> seen;
    for (const auto& s : c.samples) {
        const auto& sid = s.sample_id;
        if (!seen.insert(sid).second) add(sid, "sample_id", "sample_id unique");

        const auto& ins = s.instruction;
        check_layer(sid, "instruction.layer", ins.layer);
        if (ins.count() < 1) add(sid, "instruction.count", "count ≥ 1");
        if (ins.token_ids.size() != ins.count()) add(sid, "instruction.token_ids", "one token id per embedding");
        if (ins.embeddings.cols() != d) add(sid, "instruction.embeddings", "width = hidden_dim");
        if (!all_finite(ins.embeddings.data())) add(sid, "instruction.embeddings", "entries finite");
        for (auto id : ins.token_ids) check_id(sid, "instruction.token_ids", id);

        std::set<int> image_layers;
        for (std::size_t i = 0; i < s.images.size(); ++i) {
            const auto& img = s.images[i];
            const auto field = "images[" + std::to_string(i) + "]";
            check_layer(sid, field + ".layer", img.layer);
            if (!image_layers.insert(img.layer).second) add(sid, field + ".layer", "at most one image block per layer");
            if (img.count() < 1) add(sid, field + ".count", "count ≥ 1");
            if (img.embeddings.cols() != d) add(sid, field + ".embeddings", "width = hidden_dim");
            if (!all_finite(img.embeddings.data())) add(sid, field + ".embeddings", "entries finite");
        }

        for (std::size_t i = 0; i < s.objects.size(); ++i) {
            const auto& o = s.objects[i];
            const auto field = "objects[" + std::to_string(i) + "]";
            check_id(sid, field + ".token_id", o.token_id);
            if (o.surface.empty()) add(sid, field + ".surface", "surface non-empty");
            if (o.position < 0) add(sid, field + ".position", "position ≥ 0");
            if (o.nll && !(*o.nll <= 0.0)) add(sid, field + ".nll", "nll ≤ 0");
            if (o.entropy_score && !(*o.entropy_score <= 0.0)) add(sid, field + ".entropy_score", "entropy_score ≤ 0");
            if (o.var_table) {
                const auto v = o.var_table->data();
                if (!std::all_of(v.begin(), v.end(), [](float x) { return x >= 0.0f && x <= 1.0f; })) {
                    add(sid, field + ".var_table", "var_table entries ∈ [0, 1]");
                }
            }
            std::set<int> layers;
            for (const auto& e : o.embeddings) {
                const auto ef = field + ".embeddings[" + std::to_string(e.layer) + "]";
                check_layer(sid, ef, e.layer);
                if (!layers.insert(e.layer).second) add(sid, ef, "at most one embedding per layer");
                if (e.vector.rows() != 1 || e.vector.cols() != d) add(sid, ef, "shape = 1 × hidden_dim");
                if (!all_finite(e.vector.data())) add(sid, ef, "entries finite");
            }
        }
    }
    return report;
}

}  // namespace inslen
