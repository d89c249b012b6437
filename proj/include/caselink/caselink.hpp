// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header for the whole library.

#pragma once

#include "caselink/bm25.hpp"
#include "caselink/casegnn.hpp"
#include "caselink/common.hpp"
#include "caselink/config.hpp"
#include "caselink/corpus.hpp"
#include "caselink/encoders.hpp"
#include "caselink/evalkit.hpp"
#include "caselink/gradcheck.hpp"
#include "caselink/graph.hpp"
#include "caselink/llm.hpp"
#include "caselink/neural.hpp"
#include "caselink/pipeline.hpp"
#include "caselink/promptcase.hpp"
#include "caselink/retrieval_run.hpp"
#include "caselink/tensor.hpp"
#include "caselink/training.hpp"
