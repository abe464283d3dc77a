/*
 * Copyright (c) 2026 The Forge Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

/// UTF-8 helpers shared by the tokenizer, sentence splitter and datasets.
namespace forge::text {

struct CodePoint {
  char32_t value;
  std::size_t begin;  // byte offset
  std::size_t end;
};

/// Decodes UTF-8. Each invalid byte becomes U+FFFD spanning that byte.
std::vector<CodePoint> decode_utf8(std::string_view s);
std::string encode_utf8(char32_t cp);

bool is_space(char32_t cp);
/// Punctuation and standalone symbols; each forms a word on its own.
bool is_isolated(char32_t cp);
bool is_upper(char32_t cp);
bool is_digit(char32_t cp);

struct Word {
  std::size_t begin;  // byte offsets into the source
  std::size_t end;
};

/// Splits on Unicode whitespace, then isolates punctuation/symbol characters.
std::vector<Word> split_words(std::string_view s);

/// Trims and collapses runs of whitespace to a single ASCII space.
std::string normalize_whitespace(std::string_view s);

/// Byte offset of the code point with index `cp_index` (clamped to size).
std::size_t byte_offset_of_codepoint(std::string_view s, std::size_t cp_index);

}  // namespace forge::text
