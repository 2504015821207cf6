#pragma once

#include "safa/config.hpp"
#include "safa/core/autograd.hpp"
#include "safa/core/common.hpp"
#include "safa/core/nn_ops.hpp"
#include "safa/core/opcount.hpp"
#include "safa/core/params.hpp"
#include "safa/core/resample_ops.hpp"
#include "safa/core/tensor.hpp"
#include "safa/data/dataset.hpp"
#include "safa/data/synth.hpp"
#include "safa/eval/eval.hpp"
#include "safa/imaging/flow_io.hpp"
#include "safa/imaging/imaging.hpp"
#include "safa/imaging/png_io.hpp"
#include "safa/model/safa.hpp"
#include "safa/train/trainer.hpp"
