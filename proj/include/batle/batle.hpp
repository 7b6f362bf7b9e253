#pragma once
// Convenience umbrella for the whole library.

#include "batle/baselines.hpp"
#include "batle/dataset.hpp"
#include "batle/estimation.hpp"
#include "batle/experiment.hpp"
#include "batle/gwas.hpp"
#include "batle/hcmnist.hpp"
#include "batle/ihdp.hpp"
#include "batle/io_util.hpp"
#include "batle/kernels.hpp"
#include "batle/kmeans.hpp"
#include "batle/losses.hpp"
#include "batle/matrix.hpp"
#include "batle/mnist_idx.hpp"
#include "batle/network.hpp"
#include "batle/pca.hpp"
#include "batle/rng.hpp"
#include "batle/training.hpp"
