#pragma once

#include "seft/data/batching.hpp"
#include "seft/data/io.hpp"
#include "seft/data/normalize.hpp"
#include "seft/data/split.hpp"
#include "seft/data/synthetic.hpp"
#include "seft/data/types.hpp"
#include "seft/encoding.hpp"
#include "seft/errors.hpp"
#include "seft/metrics.hpp"
#include "seft/model/attention.hpp"
#include "seft/model/config.hpp"
#include "seft/model/seft.hpp"
#include "seft/numerics/adam.hpp"
#include "seft/numerics/compensated_sum.hpp"
#include "seft/numerics/matrix.hpp"
#include "seft/numerics/mlp.hpp"
#include "seft/numerics/parameters.hpp"
#include "seft/numerics/softmax.hpp"
#include "seft/numerics/tape.hpp"
#include "seft/online.hpp"
#include "seft/random.hpp"
#include "seft/training/checkpoint.hpp"
#include "seft/training/config.hpp"
#include "seft/training/early_stopping.hpp"
#include "seft/training/hypersearch.hpp"
#include "seft/training/loss.hpp"
#include "seft/training/trainer.hpp"
