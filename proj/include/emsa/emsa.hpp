#pragma once

#include "emsa/dataset.hpp"
#include "emsa/graph.hpp"
#include "emsa/instance_codec.hpp"
#include "emsa/label_map.hpp"
#include "emsa/losses.hpp"
#include "emsa/mask.hpp"
#include "emsa/metrics.hpp"
#include "emsa/nbt1d.hpp"
#include "emsa/ops.hpp"
#include "emsa/orientation.hpp"
#include "emsa/panoptic.hpp"
#include "emsa/png_io.hpp"
#include "emsa/spectrum.hpp"
#include "emsa/tensor.hpp"
#include "emsa/tensor_io.hpp"
