// gvec/common.cc

// Copyright 2026  gvec authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "gvec/common.h"

namespace gvec {
namespace io {

void WriteMagic(std::ostream &os, const char magic[4]) {
  os.write(magic, 4);
}

void ExpectMagic(std::istream &is, const char magic[4],
                 const std::string &what) {
  char got[4];
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw DataError("bad magic while reading " + what + ", expected \"" +
                    std::string(magic, 4) + "\"");
}

}  // namespace io
}  // namespace gvec
