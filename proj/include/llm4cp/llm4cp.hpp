// SPDX-License-Identifier: Apache-2.0
//
// llm4cp - channel prediction benchmark toolkit
// Copyright (C) 2026 The llm4cp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef LLM4CP_HPP
#define LLM4CP_HPP

#include "common.hpp"
#include "chansim.hpp"
#include "dataset_io.hpp"
#include "sigproc.hpp"
#include "weight_archive.hpp"
#include "nn/param_store.hpp"
#include "nn/layers.hpp"
#include "backbone.hpp"
#include "model.hpp"
#include "predictor.hpp"
#include "predictors.hpp"
#include "training.hpp"
#include "evaluation.hpp"
#include "config.hpp"

#endif
