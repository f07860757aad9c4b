/* Copyright 2026 The taperfx Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <taperfx/dot.hpp>
#include <taperfx/error.hpp>
#include <taperfx/formats.hpp>
#include <taperfx/nn/dataset.hpp>
#include <taperfx/nn/evaluate.hpp>
#include <taperfx/nn/fixture.hpp>
#include <taperfx/nn/float_engine.hpp>
#include <taperfx/nn/model.hpp>
#include <taperfx/nn/quantized.hpp>
#include <taperfx/nn/tensor.hpp>
#include <taperfx/select.hpp>
#include <taperfx/sim.hpp>
