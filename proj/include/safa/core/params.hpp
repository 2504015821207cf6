#pragma once

#include <fstream>
#include <map>
#include <unordered_map>

#include "safa/core/autograd.hpp"

namespace safa {

// Ordered registry of named trainable leaf tensors. Modules create their
// parameters here; the optimizer and the checkpoint writer iterate the same
// list, so nothing can be silently left out of either.
class ParamStore {
  public:
    Var create(const std::string& name, std::vector<int> dims,
               const std::function<void(Tensor&)>& init) {
        SAFA_CHECK(!by_name_.count(name), "duplicate parameter: " + name);
        Tensor t(std::move(dims));
        init(t);
        Var v = make_leaf(std::move(t), true);
        names_.push_back(name);
        by_name_[name] = v;
        return v;
    }

    Var conv_weight(const std::string& name, int cout, int cin, int kh, int kw, Rng& rng,
                    bool zero_init = false) {
        const float stddev = std::sqrt(2.f / (static_cast<float>(cin) * kh * kw));
        return create(name, {cout, cin, kh, kw}, [&](Tensor& t) {
            if (!zero_init)
                for (float& v : t) v = rng.normal(0.f, stddev);
        });
    }

    Var bias(const std::string& name, int n) {
        return create(name, {n}, [](Tensor&) {});
    }

    Var prelu_slope(const std::string& name, int n) {
        return create(name, {n}, [](Tensor& t) { t.fill(0.25f); });
    }

    Var fc_weight(const std::string& name, int cout, int cin, Rng& rng,
                  bool zero_init = false) {
        const float stddev = std::sqrt(2.f / static_cast<float>(cin));
        return create(name, {cout, cin}, [&](Tensor& t) {
            if (!zero_init)
                for (float& v : t) v = rng.normal(0.f, stddev);
        });
    }

    Var get(const std::string& name) const {
        auto it = by_name_.find(name);
        SAFA_CHECK(it != by_name_.end(), "unknown parameter: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    const std::vector<std::string>& names() const { return names_; }
    size_t size() const { return names_.size(); }

    int64_t total_count() const {
        int64_t n = 0;
        for (const auto& name : names_) n += by_name_.at(name)->value.numel();
        return n;
    }

    void zero_grads() const {
        for (const auto& name : names_) by_name_.at(name)->zero_grad();
    }

    std::vector<std::pair<std::string, Tensor>> snapshot() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.reserve(names_.size());
        for (const auto& name : names_) out.emplace_back(name, by_name_.at(name)->value);
        return out;
    }

  private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Var> by_name_;
};

// ---------------------------------------------------------------------------
// Flat named-tensor archive, shared by extractor weight loading and training
// checkpoints. Binary layout: magic, format version, metadata string, then
// (name, dims, float32 data) records.

namespace archive {

constexpr char kMagic[8] = {'S', 'A', 'F', 'A', 'T', 'N', 'S', 'R'};
constexpr uint32_t kVersion = 1;

inline void save(const std::string& path,
                 const std::vector<std::pair<std::string, Tensor>>& tensors,
                 const std::string& meta = "") {
    std::ofstream f(path, std::ios::binary);
    SAFA_REQUIRE(f.good(), "archive: cannot open " + path + " for writing");
    f.write(kMagic, 8);
    auto write_u32 = [&f](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    write_u32(kVersion);
    write_u32(static_cast<uint32_t>(meta.size()));
    f.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    write_u32(static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_u32(static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(static_cast<uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) write_u32(static_cast<uint32_t>(t.dim(i)));
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    SAFA_REQUIRE(f.good(), "archive: write failed for " + path);
}

struct Loaded {
    std::string meta;
    std::map<std::string, Tensor> tensors;
};

inline Loaded load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    SAFA_REQUIRE(f.good(), "archive: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    SAFA_REQUIRE(f.good() && std::memcmp(magic, kMagic, 8) == 0,
                 "archive: bad magic in " + path);
    auto read_u32 = [&f, &path]() {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        SAFA_REQUIRE(f.good(), "archive: truncated file " + path);
        return v;
    };
    const uint32_t version = read_u32();
    SAFA_REQUIRE(version == kVersion,
                 "archive: version mismatch in " + path + " (got " +
                     std::to_string(version) + ", expected " + std::to_string(kVersion) + ")");
    Loaded out;
    const uint32_t meta_len = read_u32();
    out.meta.resize(meta_len);
    f.read(out.meta.data(), meta_len);
    const uint32_t count = read_u32();
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32();
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t ndim = read_u32();
        std::vector<int> dims(ndim);
        for (uint32_t d = 0; d < ndim; ++d) dims[d] = static_cast<int>(read_u32());
        Tensor t(dims);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(float)));
        SAFA_REQUIRE(f.good(), "archive: truncated tensor data in " + path);
        out.tensors.emplace(std::move(name), std::move(t));
    }
    return out;
}

}  // namespace archive
}  // namespace safa
