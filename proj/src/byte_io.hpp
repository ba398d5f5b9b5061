// Copyright 2026 The tokalign Authors.
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

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "tokalign/error.hpp"

namespace tokalign::detail {

// Little-endian append-only encoder.
class ByteWriter {
 public:
  void put_bytes(std::string_view s) { out_.append(s); }

  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
  }

  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

  std::string take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::string_view get_bytes(std::size_t n) {
    require(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t get_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(in_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float get_f32() { return std::bit_cast<float>(get_u32()); }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void require(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorCode::length_mismatch,
                  "unexpected end of data: need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", have " +
                      std::to_string(remaining()));
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace tokalign::detail
