#include "kseg/nifti_io.hpp"

#include <zlib.h>

#include <cstring>
#include <string>
#include <vector>

namespace kseg {
namespace {

// The fixed 348-byte NIfTI-1 header. Field names follow the standard.
#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

enum NiftiDatatype : int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

constexpr const char* kNormalizedNote = "kseg:normalized";

// gzread handles both gzip streams and plain files, so a single read path
// covers .nii and .nii.gz.
class GzReader {
public:
    explicit GzReader(const std::filesystem::path& path) {
        f_ = gzopen(path.string().c_str(), "rb");
        if (!f_) throw IoError("cannot open " + path.string());
    }
    ~GzReader() {
        if (f_) gzclose(f_);
    }
    GzReader(const GzReader&) = delete;
    GzReader& operator=(const GzReader&) = delete;

    void read_exact(void* dst, size_t bytes, const std::string& what) {
        auto* p = static_cast<unsigned char*>(dst);
        while (bytes > 0) {
            unsigned chunk = bytes > (1u << 30) ? (1u << 30) : static_cast<unsigned>(bytes);
            int got = gzread(f_, p, chunk);
            if (got <= 0) throw FormatError("truncated NIfTI payload while reading " + what);
            p += got;
            bytes -= static_cast<size_t>(got);
        }
    }
    void skip(size_t bytes) {
        if (gzseek(f_, static_cast<z_off_t>(bytes), SEEK_CUR) < 0)
            throw FormatError("bad seek in NIfTI stream");
    }

private:
    gzFile f_ = nullptr;
};

struct LoadedImage {
    Nifti1Header hdr;
    std::vector<char> payload;  // raw voxel bytes, file order (x fastest)
    long nz, ny, nx;
    size_t elem_size;
};

size_t datatype_size(int16_t dt) {
    switch (dt) {
        case DT_UINT8:
        case DT_INT8:
            return 1;
        case DT_INT16:
        case DT_UINT16:
            return 2;
        case DT_INT32:
        case DT_UINT32:
        case DT_FLOAT32:
            return 4;
        case DT_FLOAT64:
            return 8;
        default:
            throw FormatError("unsupported NIfTI datatype code " + std::to_string(dt));
    }
}

LoadedImage read_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    GzReader in(path);

    LoadedImage img{};
    in.read_exact(&img.hdr, sizeof(Nifti1Header), "header");
    const Nifti1Header& h = img.hdr;

    if (h.sizeof_hdr != 348) {
        // 1543569408 is 348 byte-swapped: a valid but big-endian file.
        if (h.sizeof_hdr == 1543569408)
            throw FormatError("big-endian NIfTI not supported: " + path.string());
        throw FormatError("not a NIfTI-1 file: " + path.string());
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
        throw FormatError("bad NIfTI magic in " + path.string());
    if (std::strncmp(h.magic, "ni1", 3) == 0)
        throw FormatError("detached .hdr/.img pairs not supported: " + path.string());

    // Accept dim[0] > 3 only when the trailing dims are singleton.
    if (h.dim[0] < 3) throw FormatError("expected 3D data in " + path.string());
    for (int d = 4; d <= h.dim[0]; ++d)
        if (h.dim[d] > 1)
            throw FormatError("expected 3D scalar data, got " + std::to_string(h.dim[0]) +
                              "D in " + path.string());

    img.nx = h.dim[1];
    img.ny = h.dim[2];
    img.nz = h.dim[3];
    if (img.nx < 1 || img.ny < 1 || img.nz < 1)
        throw FormatError("degenerate dimensions in " + path.string());

    img.elem_size = datatype_size(h.datatype);
    size_t n = static_cast<size_t>(img.nx) * img.ny * img.nz;

    size_t offset = h.vox_offset >= 352.f ? static_cast<size_t>(h.vox_offset) : 352;
    in.skip(offset - sizeof(Nifti1Header));

    img.payload.resize(n * img.elem_size);
    in.read_exact(img.payload.data(), img.payload.size(), "voxels");
    return img;
}

GridGeometry geometry_from(const Nifti1Header& h, long nz, long ny, long nx,
                           const std::filesystem::path& path) {
    GridGeometry g;
    g.shape = {nz, ny, nx};
    g.spacing = {h.pixdim[3], h.pixdim[2], h.pixdim[1]};
    for (int a = 0; a < 3; ++a)
        if (!(g.spacing[a] > 0.0))
            throw FormatError("non-positive pixdim in " + path.string());
    if (h.sform_code > 0) {
        g.origin = {h.srow_z[3], h.srow_y[3], h.srow_x[3]};
    } else {
        g.origin = {h.qoffset_z, h.qoffset_y, h.qoffset_x};
    }
    return g;
}

template <class Src>
void convert_to_float(const std::vector<char>& raw, std::vector<float>& out) {
    const Src* p = reinterpret_cast<const Src*>(raw.data());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(p[i]);
}

// x-fastest file order equals our (z,y,x) row-major order, so conversion is
// a straight element cast with no shuffling.
void payload_to_float(const LoadedImage& img, std::vector<float>& out) {
    out.resize(static_cast<size_t>(img.nx) * img.ny * img.nz);
    switch (img.hdr.datatype) {
        case DT_UINT8: convert_to_float<uint8_t>(img.payload, out); break;
        case DT_INT8: convert_to_float<int8_t>(img.payload, out); break;
        case DT_INT16: convert_to_float<int16_t>(img.payload, out); break;
        case DT_UINT16: convert_to_float<uint16_t>(img.payload, out); break;
        case DT_INT32: convert_to_float<int32_t>(img.payload, out); break;
        case DT_UINT32: convert_to_float<uint32_t>(img.payload, out); break;
        case DT_FLOAT32: convert_to_float<float>(img.payload, out); break;
        case DT_FLOAT64: convert_to_float<double>(img.payload, out); break;
        default: throw FormatError("unsupported datatype");
    }
}

bool is_integer_datatype(int16_t dt) {
    switch (dt) {
        case DT_UINT8:
        case DT_INT8:
        case DT_INT16:
        case DT_UINT16:
        case DT_INT32:
        case DT_UINT32:
            return true;
        default:
            return false;
    }
}

template <class Src>
void convert_labels(const std::vector<char>& raw, std::vector<uint8_t>& out,
                    const std::filesystem::path& path) {
    const Src* p = reinterpret_cast<const Src*>(raw.data());
    for (size_t i = 0; i < out.size(); ++i) {
        long long v = static_cast<long long>(p[i]);
        if (v < 0 || v > 3)
            throw FormatError("label value " + std::to_string(v) + " outside {0,1,2,3} in " +
                              path.string());
        out[i] = static_cast<uint8_t>(v);
    }
}

class Writer {
public:
    Writer(const std::filesystem::path& path, bool gz) : gz_(gz) {
        if (gz_) {
            zf_ = gzopen(path.string().c_str(), "wb");
            if (!zf_) throw IoError("cannot open for writing: " + path.string());
        } else {
            f_ = std::fopen(path.string().c_str(), "wb");
            if (!f_) throw IoError("cannot open for writing: " + path.string());
        }
    }
    ~Writer() { close_quiet(); }
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void write(const void* src, size_t bytes, const std::filesystem::path& path) {
        bool ok = gz_ ? gzwrite(zf_, src, static_cast<unsigned>(bytes)) ==
                            static_cast<int>(bytes)
                      : std::fwrite(src, 1, bytes, f_) == bytes;
        if (!ok) throw IoError("write failed: " + path.string());
    }
    void close(const std::filesystem::path& path) {
        bool ok = true;
        if (gz_ && zf_) ok = gzclose(zf_) == Z_OK, zf_ = nullptr;
        if (!gz_ && f_) ok = std::fclose(f_) == 0, f_ = nullptr;
        if (!ok) throw IoError("close failed: " + path.string());
    }

private:
    void close_quiet() {
        if (zf_) gzclose(zf_);
        if (f_) std::fclose(f_);
        zf_ = nullptr;
        f_ = nullptr;
    }
    bool gz_;
    gzFile zf_ = nullptr;
    std::FILE* f_ = nullptr;
};

bool wants_gzip(const std::filesystem::path& path) {
    return path.extension() == ".gz";
}

Nifti1Header make_header(const GridGeometry& g, int16_t datatype, const char* note) {
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.dim[0] = 3;
    h.dim[1] = static_cast<int16_t>(g.shape[2]);
    h.dim[2] = static_cast<int16_t>(g.shape[1]);
    h.dim[3] = static_cast<int16_t>(g.shape[0]);
    for (int d = 4; d < 8; ++d) h.dim[d] = 1;
    h.datatype = datatype;
    h.bitpix = static_cast<int16_t>(datatype_size(datatype) * 8);
    h.pixdim[0] = 1.f;
    h.pixdim[1] = static_cast<float>(g.spacing[2]);
    h.pixdim[2] = static_cast<float>(g.spacing[1]);
    h.pixdim[3] = static_cast<float>(g.spacing[0]);
    h.vox_offset = 352.f;
    h.scl_slope = 1.f;
    h.scl_inter = 0.f;
    h.xyzt_units = 2;  // millimetres
    if (note) std::strncpy(h.descrip, note, sizeof(h.descrip) - 1);
    h.qform_code = 1;
    h.sform_code = 1;
    h.quatern_b = h.quatern_c = h.quatern_d = 0.f;  // identity rotation
    h.qoffset_x = static_cast<float>(g.origin[2]);
    h.qoffset_y = static_cast<float>(g.origin[1]);
    h.qoffset_z = static_cast<float>(g.origin[0]);
    h.srow_x[0] = static_cast<float>(g.spacing[2]);
    h.srow_x[3] = static_cast<float>(g.origin[2]);
    h.srow_y[1] = static_cast<float>(g.spacing[1]);
    h.srow_y[3] = static_cast<float>(g.origin[1]);
    h.srow_z[2] = static_cast<float>(g.spacing[0]);
    h.srow_z[3] = static_cast<float>(g.origin[0]);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

void write_image(const std::filesystem::path& path, const Nifti1Header& h, const void* data,
                 size_t bytes) {
    auto parent = path.parent_path();
    if (!parent.empty() && !std::filesystem::exists(parent)) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (ec) throw IoError("cannot create directory " + parent.string());
    }
    Writer out(path, wants_gzip(path));
    out.write(&h, sizeof(h), path);
    const char pad[4] = {0, 0, 0, 0};  // header extension flag
    out.write(pad, 4, path);
    out.write(data, bytes, path);
    out.close(path);
}

}  // namespace

CtVolume load_volume(const std::filesystem::path& path) {
    LoadedImage img = read_file(path);
    CtVolume vol;
    vol.geom = geometry_from(img.hdr, img.nz, img.ny, img.nx, path);
    payload_to_float(img, vol.voxels);

    float slope = img.hdr.scl_slope, inter = img.hdr.scl_inter;
    if (slope != 0.f && (slope != 1.f || inter != 0.f))
        for (float& x : vol.voxels) x = slope * x + inter;

    if (std::strncmp(img.hdr.descrip, kNormalizedNote, std::strlen(kNormalizedNote)) == 0) {
        vol.normalized = true;
        for (float x : vol.voxels)
            if (!(x >= -1.f && x <= 1.f))
                throw FormatError("volume marked normalized holds values outside [-1,1]: " +
                                  path.string());
    }
    return vol;
}

LabelMask load_mask(const std::filesystem::path& path) {
    LoadedImage img = read_file(path);
    if (!is_integer_datatype(img.hdr.datatype))
        throw FormatError("mask must have an integer datatype: " + path.string());

    LabelMask mask;
    mask.geom = geometry_from(img.hdr, img.nz, img.ny, img.nx, path);
    mask.labels.resize(static_cast<size_t>(mask.num_voxels()));
    switch (img.hdr.datatype) {
        case DT_UINT8: convert_labels<uint8_t>(img.payload, mask.labels, path); break;
        case DT_INT8: convert_labels<int8_t>(img.payload, mask.labels, path); break;
        case DT_INT16: convert_labels<int16_t>(img.payload, mask.labels, path); break;
        case DT_UINT16: convert_labels<uint16_t>(img.payload, mask.labels, path); break;
        case DT_INT32: convert_labels<int32_t>(img.payload, mask.labels, path); break;
        case DT_UINT32: convert_labels<uint32_t>(img.payload, mask.labels, path); break;
        default: throw FormatError("unsupported mask datatype");
    }
    return mask;
}

LabelMask load_mask(const std::filesystem::path& path, const CtVolume& reference) {
    LabelMask mask = load_mask(path);
    if (mask.shape() != reference.shape())
        throw AlignmentError("mask shape does not match reference volume: " + path.string());
    return mask;
}

void save_mask(const LabelMask& mask, const std::filesystem::path& path) {
    Nifti1Header h = make_header(mask.geom, DT_UINT8, nullptr);
    write_image(path, h, mask.labels.data(), mask.labels.size());
}

void save_volume(const CtVolume& vol, const std::filesystem::path& path) {
    Nifti1Header h = make_header(vol.geom, DT_FLOAT32, vol.normalized ? kNormalizedNote : nullptr);
    write_image(path, h, vol.voxels.data(), vol.voxels.size() * sizeof(float));
}

}  // namespace kseg
