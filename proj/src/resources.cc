// Copyright 2026 The oversub Authors.
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
#include "oversub/resources.h"

namespace oversub {

std::string_view resource_name(Resource r) {
  switch (r) {
    case Resource::kCpu:
      return "cpu";
    case Resource::kMem:
      return "mem";
    case Resource::kNet:
      return "net";
    case Resource::kSsd:
      return "ssd";
  }
  return "?";
}

std::optional<Resource> parse_resource(std::string_view name) {
  for (Resource r : kAllResources) {
    if (resource_name(r) == name) return r;
  }
  return std::nullopt;
}

}  // namespace oversub
