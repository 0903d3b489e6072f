// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mal/beam_search.hpp"
#include "mal/checkpoint.hpp"
#include "mal/corpus.hpp"
#include "mal/decoder.hpp"
#include "mal/encoder.hpp"
#include "mal/errors.hpp"
#include "mal/grad_check.hpp"
#include "mal/graph_salience.hpp"
#include "mal/linalg.hpp"
#include "mal/model.hpp"
#include "mal/ops.hpp"
#include "mal/param_store.hpp"
#include "mal/rouge.hpp"
#include "mal/salience_eval.hpp"
#include "mal/tensor.hpp"
#include "mal/trainer.hpp"
