#pragma once

#include "safa/config.hpp"
#include "safa/core/nn_ops.hpp"
#include "safa/core/params.hpp"
#include "safa/core/resample_ops.hpp"

namespace safa {

struct Conv {
    Var w, b;
    int stride = 1;
    Conv() = default;
    Conv(ParamStore& ps, const std::string& name, int cin, int cout, int k, Rng& rng,
         int stride_ = 1, bool zero_init = false)
        : w(ps.conv_weight(name + ".w", cout, cin, k, k, rng, zero_init)),
          b(ps.bias(name + ".b", cout)),
          stride(stride_) {}
    Var operator()(const Var& x) const { return conv2d(x, w, b, stride); }
};

struct PRelu {
    Var a;
    PRelu() = default;
    PRelu(ParamStore& ps, const std::string& name, int channels)
        : a(ps.prelu_slope(name + ".slope", channels)) {}
    Var operator()(const Var& x) const { return prelu(x, a); }
};

// ResNet basic block; entry blocks use stride 2 and a 1x1 projection skip.
struct BasicBlock {
    Conv c1, c2, skip;
    PRelu a1, a2;
    bool has_skip = false;
    BasicBlock() = default;
    BasicBlock(ParamStore& ps, const std::string& name, int cin, int cout, Rng& rng,
               int stride = 1)
        : c1(ps, name + ".conv1", cin, cout, 3, rng, stride),
          c2(ps, name + ".conv2", cout, cout, 3, rng),
          a1(ps, name + ".act1", cout),
          a2(ps, name + ".act2", cout) {
        has_skip = (stride != 1 || cin != cout);
        if (has_skip) skip = Conv(ps, name + ".skip", cin, cout, 1, rng, stride);
    }
    Var operator()(const Var& x) const {
        Var y = c2(a1(c1(x)));
        Var s = has_skip ? skip(x) : x;
        return a2(add(y, s));
    }
};

// ResNet-50-style bottleneck: 1x1 reduce, 3x3, 1x1 expand.
struct BottleneckBlock {
    Conv c1, c2, c3, skip;
    PRelu a1, a2, a3;
    bool has_skip = false;
    BottleneckBlock() = default;
    BottleneckBlock(ParamStore& ps, const std::string& name, int cin, int cout, Rng& rng,
                    int stride = 1)
        : c1(ps, name + ".conv1", cin, cout / 2, 1, rng),
          c2(ps, name + ".conv2", cout / 2, cout / 2, 3, rng, stride),
          c3(ps, name + ".conv3", cout / 2, cout, 1, rng),
          a1(ps, name + ".act1", cout / 2),
          a2(ps, name + ".act2", cout / 2),
          a3(ps, name + ".act3", cout) {
        has_skip = (stride != 1 || cin != cout);
        if (has_skip) skip = Conv(ps, name + ".skip", cin, cout, 1, rng, stride);
    }
    Var operator()(const Var& x) const {
        Var y = c3(a2(c2(a1(c1(x)))));
        Var s = has_skip ? skip(x) : x;
        return a3(add(y, s));
    }
};

}  // namespace safa
