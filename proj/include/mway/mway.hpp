// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/align.hpp"
#include "mway/dataio.hpp"
#include "mway/error.hpp"
#include "mway/eval.hpp"
#include "mway/gcca.hpp"
#include "mway/gcpa.hpp"
#include "mway/numkernel.hpp"
#include "mway/pipeline.hpp"
#include "mway/random.hpp"
