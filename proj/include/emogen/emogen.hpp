// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "emogen/codebook.hpp"
#include "emogen/codebook_io.hpp"
#include "emogen/csv.hpp"
#include "emogen/errors.hpp"
#include "emogen/image_io.hpp"
#include "emogen/optimizer.hpp"
#include "emogen/palette.hpp"
#include "emogen/prompts.hpp"
#include "emogen/rng.hpp"
#include "emogen/scorer.hpp"
#include "emogen/survey.hpp"
