#pragma once

#include "wlrtr/deblur.hpp"
#include "wlrtr/degradation.hpp"
#include "wlrtr/denoise.hpp"
#include "wlrtr/destripe.hpp"
#include "wlrtr/error.hpp"
#include "wlrtr/fft.hpp"
#include "wlrtr/grouping.hpp"
#include "wlrtr/hosvd.hpp"
#include "wlrtr/io.hpp"
#include "wlrtr/quality.hpp"
#include "wlrtr/shrinkage.hpp"
#include "wlrtr/superres.hpp"
#include "wlrtr/tensor.hpp"
