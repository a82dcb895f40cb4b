#pragma once

#include "aecr/contrast/extractor.hpp"
#include "aecr/contrast/loss.hpp"
#include "aecr/contrast/sampling.hpp"
#include "aecr/core/errors.hpp"
#include "aecr/core/tensor.hpp"
#include "aecr/data/dataset.hpp"
#include "aecr/data/haze.hpp"
#include "aecr/data/image_io.hpp"
#include "aecr/data/padding.hpp"
#include "aecr/deform/bilinear.hpp"
#include "aecr/deform/deform_conv.hpp"
#include "aecr/eval/metrics.hpp"
#include "aecr/network/config.hpp"
#include "aecr/network/dehaze_network.hpp"
#include "aecr/network/fa_block.hpp"
#include "aecr/network/mixup.hpp"
#include "aecr/train/checkpoint.hpp"
#include "aecr/train/config.hpp"
#include "aecr/train/optim.hpp"
#include "aecr/train/trainer.hpp"
