#pragma once

#include "handfk/preproc.hpp"

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace handfk {

// Little-endian layout:
//   header  "HANDCORP" | u32 version | u64 count | f64 cube_side_mm
//           | u32 output_size | u32 joint_count
//   sample  char[8] dataset | char[24] subject | char[64] frame (NUL padded)
//           | 3 x f64 palm_center_mm | joint_count x 3 x f64 joints_norm
//           | output_size^2 x f32 depth (row-major)
inline constexpr std::uint32_t kCorpusVersion = 1;
inline constexpr std::size_t kTagDatasetWidth = 8;
inline constexpr std::size_t kTagSubjectWidth = 24;
inline constexpr std::size_t kTagFrameWidth = 64;

struct Corpus {
  CropSpec crop;
  int joint_count = 0;
  std::vector<Sample> samples;
};

/// Streams samples to disk; the sample count in the header is patched by close().
class CorpusWriter {
 public:
  CorpusWriter(const std::string& path, const CropSpec& crop, int joint_count);
  ~CorpusWriter();
  CorpusWriter(const CorpusWriter&) = delete;
  CorpusWriter& operator=(const CorpusWriter&) = delete;

  void append(const Sample& sample);
  void close();
  std::uint64_t count() const {
    return count_;
  }

 private:
  std::string path_;
  std::ofstream out_;
  CropSpec crop_;
  int joint_count_;
  std::uint64_t count_ = 0;
};

void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

} // namespace handfk
