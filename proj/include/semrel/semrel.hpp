// Copyright 2026 The semrel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "semrel/ablation.hpp"
#include "semrel/config.hpp"
#include "semrel/contrast.hpp"
#include "semrel/embedding.hpp"
#include "semrel/error.hpp"
#include "semrel/gradcheck.hpp"
#include "semrel/io.hpp"
#include "semrel/numerics.hpp"
#include "semrel/relation.hpp"
#include "semrel/rng.hpp"
#include "semrel/semantic.hpp"
#include "semrel/simmap.hpp"
#include "semrel/synthetic.hpp"
#include "semrel/train.hpp"
