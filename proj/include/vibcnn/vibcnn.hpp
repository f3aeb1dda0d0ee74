#pragma once

#include "vibcnn/error.hpp"
#include "vibcnn/random.hpp"
#include "vibcnn/binary_io.hpp"
#include "vibcnn/ingest/mat5.hpp"
#include "vibcnn/ingest/signal.hpp"
#include "vibcnn/ingest/catalog.hpp"
#include "vibcnn/ingest/synth.hpp"
#include "vibcnn/pipeline/segment.hpp"
#include "vibcnn/pipeline/segment_cache.hpp"
#include "vibcnn/nn/tensor.hpp"
#include "vibcnn/nn/kernels.hpp"
#include "vibcnn/nn/model.hpp"
#include "vibcnn/train/adam.hpp"
#include "vibcnn/train/fit.hpp"
#include "vibcnn/train/checkpoint.hpp"
#include "vibcnn/eval/metrics.hpp"
#include "vibcnn/tsne/tsne.hpp"
#include "vibcnn/cli/config.hpp"
#include "vibcnn/cli/commands.hpp"
