#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <vector>

#include "safa/core/common.hpp"

namespace safa {

// 64-byte-aligned allocator for tensor storage. Keeping every buffer on the
// same alignment makes Eigen's vectorized kernels take identical code paths
// regardless of where the heap places an allocation, which in turn makes
// training runs bit-reproducible within a process.
template <class T>
struct AlignedAlloc {
    using value_type = T;
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U>&) {}
    T* allocate(size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(64)));
    }
    void deallocate(T* p, size_t) noexcept { ::operator delete(p, std::align_val_t(64)); }
    template <class U>
    bool operator==(const AlignedAlloc<U>&) const { return true; }
};

using FloatStore = std::vector<float, AlignedAlloc<float>>;

// Dense row-major float tensor with shared storage. Copies are shallow;
// use clone() for a deep copy.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        for (const int d : dims_)
            SAFA_CHECK(d > 0, "Tensor: dimensions must be positive");
        data_ = std::make_shared<FloatStore>(numel(), 0.f);
    }

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

    static Tensor full(std::vector<int> dims, float v) {
        Tensor t(std::move(dims));
        std::fill(t.begin(), t.end(), v);
        return t;
    }

    static Tensor from_data(std::vector<int> dims, std::vector<float> data) {
        Tensor t;
        t.dims_ = std::move(dims);
        SAFA_CHECK(static_cast<size_t>(t.numel()) == data.size(),
                   "Tensor::from_data: element count mismatch");
        t.data_ = std::make_shared<FloatStore>(data.begin(), data.end());
        return t;
    }

    static Tensor randn(std::vector<int> dims, Rng& rng, float stddev = 1.f) {
        Tensor t(std::move(dims));
        for (float& v : t) v = rng.normal(0.f, stddev);
        return t;
    }

    static Tensor rand(std::vector<int> dims, Rng& rng, float lo = 0.f, float hi = 1.f) {
        Tensor t(std::move(dims));
        for (float& v : t) v = rng.uniform(lo, hi);
        return t;
    }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_.at(static_cast<size_t>(i)); }
    int ndim() const { return static_cast<int>(dims_.size()); }

    int64_t numel() const {
        int64_t n = 1;
        for (int d : dims_) n *= d;
        return dims_.empty() ? 0 : n;
    }

    bool defined() const { return data_ != nullptr; }

    float* data() { return data_->data(); }
    const float* data() const { return data_->data(); }
    float* begin() { return data(); }
    float* end() { return data() + numel(); }
    const float* begin() const { return data(); }
    const float* end() const { return data() + numel(); }

    float& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    // NCHW accessor
    float& at4(int n, int c, int h, int w) {
        return (*data_)[((static_cast<int64_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    float at4(int n, int c, int h, int w) const {
        return (*data_)[((static_cast<int64_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    // CHW accessor
    float& at3(int c, int h, int w) {
        return (*data_)[(static_cast<int64_t>(c) * dims_[1] + h) * dims_[2] + w];
    }
    float at3(int c, int h, int w) const {
        return (*data_)[(static_cast<int64_t>(c) * dims_[1] + h) * dims_[2] + w];
    }

    Tensor clone() const {
        Tensor t;
        t.dims_ = dims_;
        t.data_ = std::make_shared<FloatStore>(*data_);
        return t;
    }

    Tensor reshaped(std::vector<int> dims) const {
        Tensor t;
        t.dims_ = std::move(dims);
        SAFA_CHECK(t.numel() == numel(), "reshape: element count mismatch");
        t.data_ = data_;
        return t;
    }

    void fill(float v) { std::fill(begin(), end(), v); }
    void zero() { fill(0.f); }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    bool all_finite() const {
        for (const float v : *data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    float max_abs() const {
        float m = 0.f;
        for (const float v : *data_) m = std::max(m, std::fabs(v));
        return m;
    }

    float sum() const { return std::accumulate(begin(), end(), 0.f); }

  private:
    std::vector<int> dims_;
    std::shared_ptr<FloatStore> data_;
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (int i = 0; i < t.ndim(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.dim(i));
    }
    return s + "]";
}

}  // namespace safa
