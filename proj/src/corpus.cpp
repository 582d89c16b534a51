#include "handfk/corpus.hpp"

#include "handfk/errors.hpp"

#include "binio.hpp"

#include <cstring>

namespace handfk {

namespace {

constexpr const char* kModule = "corpus";
constexpr char kMagic[8] = {'H', 'A', 'N', 'D', 'C', 'O', 'R', 'P'};
constexpr std::streamoff kCountOffset = 8 + 4;

template <typename T>
void put(std::ostream& out, T value) {
  binio::put(out, value);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  return binio::get<T>(in, kModule, path);
}

void put_tag(std::ostream& out, const std::string& text, std::size_t width, const char* field) {
  if (text.size() > width) {
    throw ValidationError(
        kModule, std::string("tag ") + field + " '" + text + "' exceeds " + std::to_string(width) + " bytes");
  }
  std::string padded = text;
  padded.resize(width, '\0');
  out.write(padded.data(), static_cast<std::streamsize>(width));
}

std::string get_tag(std::istream& in, std::size_t width, const std::string& path) {
  std::string buf(width, '\0');
  if (!in.read(buf.data(), static_cast<std::streamsize>(width))) {
    throw ParseError(kModule, path + ": truncated file");
  }
  buf.resize(std::strlen(buf.c_str()));
  return buf;
}

} // namespace

CorpusWriter::CorpusWriter(const std::string& path, const CropSpec& crop, int joint_count)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), crop_(crop), joint_count_(joint_count) {
  check_crop(crop);
  if (!out_) {
    throw RuntimeFailure(kModule, "cannot open '" + path + "' for writing");
  }
  out_.write(kMagic, sizeof(kMagic));
  put(out_, kCorpusVersion);
  put(out_, std::uint64_t{0});
  put(out_, crop.cube_side_mm);
  put(out_, static_cast<std::uint32_t>(crop.output_size));
  put(out_, static_cast<std::uint32_t>(joint_count));
}

CorpusWriter::~CorpusWriter() {
  try {
    close();
  } catch (...) {
  }
}

void CorpusWriter::append(const Sample& s) {
  if (!out_.is_open()) {
    throw RuntimeFailure(kModule, path_ + ": writer already closed");
  }
  if (s.size != crop_.output_size || s.depth.size() != static_cast<std::size_t>(s.size) * s.size) {
    throw ValidationError(kModule, "sample depth is not " + std::to_string(crop_.output_size) + " square");
  }
  if (s.joints_norm.size() != joint_count_) {
    throw ValidationError(
        kModule, "sample has " + std::to_string(s.joints_norm.size()) + " joints, expected " +
                     std::to_string(joint_count_));
  }
  put_tag(out_, s.tag.dataset, kTagDatasetWidth, "dataset");
  put_tag(out_, s.tag.subject, kTagSubjectWidth, "subject");
  put_tag(out_, s.tag.frame, kTagFrameWidth, "frame");
  for (int k = 0; k < 3; ++k) {
    put(out_, s.palm_center_mm[k]);
  }
  for (int j = 0; j < joint_count_; ++j) {
    for (int k = 0; k < 3; ++k) {
      put(out_, s.joints_norm.positions(k, j));
    }
  }
  for (float d : s.depth) {
    put(out_, d);
  }
  if (!out_) {
    throw RuntimeFailure(kModule, path_ + ": write failed");
  }
  ++count_;
}

void CorpusWriter::close() {
  if (!out_.is_open()) {
    return;
  }
  out_.seekp(kCountOffset);
  put(out_, count_);
  out_.close();
  if (!out_) {
    throw RuntimeFailure(kModule, path_ + ": write failed");
  }
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  CorpusWriter writer(path, corpus.crop, corpus.joint_count);
  for (const auto& s : corpus.samples) {
    writer.append(s);
  }
  writer.close();
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RuntimeFailure(kModule, "cannot open '" + path + "'");
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ParseError(kModule, path + ": bad magic, not a corpus file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCorpusVersion) {
    throw ParseError(kModule, path + ": unsupported version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, path);
  Corpus corpus;
  corpus.crop.cube_side_mm = get<double>(in, path);
  corpus.crop.output_size = static_cast<int>(get<std::uint32_t>(in, path));
  corpus.joint_count = static_cast<int>(get<std::uint32_t>(in, path));
  check_crop(corpus.crop);

  const auto n = static_cast<std::size_t>(corpus.crop.output_size);
  for (std::uint64_t i = 0; i < count; ++i) {
    Sample s;
    s.tag.dataset = get_tag(in, kTagDatasetWidth, path);
    s.tag.subject = get_tag(in, kTagSubjectWidth, path);
    s.tag.frame = get_tag(in, kTagFrameWidth, path);
    for (int k = 0; k < 3; ++k) {
      s.palm_center_mm[k] = get<double>(in, path);
    }
    s.joints_norm.positions.resize(3, corpus.joint_count);
    for (int j = 0; j < corpus.joint_count; ++j) {
      for (int k = 0; k < 3; ++k) {
        s.joints_norm.positions(k, j) = get<double>(in, path);
      }
    }
    s.size = corpus.crop.output_size;
    s.depth.resize(n * n);
    for (auto& d : s.depth) {
      d = get<float>(in, path);
    }
    corpus.samples.push_back(std::move(s));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(kModule, path + ": trailing bytes after " + std::to_string(count) + " samples");
  }
  return corpus;
}

} // namespace handfk
