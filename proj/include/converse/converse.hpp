#pragma once

#include "converse/blocks.hpp"
#include "converse/converse2d.hpp"
#include "converse/error.hpp"
#include "converse/fft.hpp"
#include "converse/image_io.hpp"
#include "converse/kernel_io.hpp"
#include "converse/oracle.hpp"
#include "converse/serialize.hpp"
#include "converse/tensor.hpp"
#include "converse/tensor_ops.hpp"
