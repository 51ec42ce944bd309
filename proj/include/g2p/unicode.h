// Copyright 2026 The g2pstudio Authors.
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

#ifndef G2P_UNICODE_H_
#define G2P_UNICODE_H_

#include <string>
#include <string_view>
#include <vector>

namespace g2p::unicode {

// NFC-normalizes UTF-8 text. Invalid UTF-8 throws g2p::FormatError.
std::string nfc(std::string_view utf8);

// Full Unicode lowercase mapping (locale-independent root rules).
std::string to_lower(std::string_view utf8);

// Splits text into extended grapheme clusters.
std::vector<std::string> grapheme_clusters(std::string_view utf8);

// True when every code point in the cluster is white space.
bool is_space(std::string_view cluster);

// Strips leading and trailing ASCII white space.
std::string_view trim(std::string_view s);

}  // namespace g2p::unicode

#endif  // G2P_UNICODE_H_
