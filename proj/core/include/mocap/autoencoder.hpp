#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mocap/types.hpp"

namespace mocap {

/// Pose autoencoder interface: encode poses into a Z-dimensional latent
/// space and decode back. Implementations are immutable after
/// construction and shareable across threads.
class Autoencoder {
public:
    virtual ~Autoencoder() = default;

    virtual int latent_dim() const = 0;
    virtual int pose_dim() const = 0;
    virtual Vec encode(const Vec& theta) const = 0;
    virtual Vec decode(const Vec& z) const = 0;

    /// d decode / d z, pose_dim x latent_dim. The default is a central
    /// difference; linear implementations override with the exact matrix.
    virtual Mat decode_jacobian(const Vec& z) const;

    /// Per-dimension scale of the latent prior (used by prior sampling).
    virtual Vec latent_scale() const { return Vec::Ones(latent_dim()); }
};

/// Pass-through autoencoder (latent space = pose space).
class IdentityAutoencoder final : public Autoencoder {
public:
    explicit IdentityAutoencoder(int dim) : dim_(dim) {}
    int latent_dim() const override { return dim_; }
    int pose_dim() const override { return dim_; }
    Vec encode(const Vec& theta) const override { return theta; }
    Vec decode(const Vec& z) const override { return z; }
    Mat decode_jacobian(const Vec&) const override { return Mat::Identity(dim_, dim_); }

private:
    int dim_;
};

/// Linear principal-component autoencoder, the reference implementation.
/// encode projects onto the leading principal directions, decode
/// reconstructs. Directions are orthonormal rows sorted by descending
/// explained variance. When the data rank is below the requested latent
/// dimension the trailing latent coordinates are dead (encode writes
/// zeros, decode ignores them) and rank_deficient() reports it.
class PcaAutoencoder final : public Autoencoder {
public:
    /// Fits on a pose dataset; requires more samples than latent
    /// dimensions.
    static PcaAutoencoder fit(const std::vector<Vec>& poses, int latent_dim);

    int latent_dim() const override { return latent_dim_; }
    int pose_dim() const override { return static_cast<int>(mean_.size()); }
    Vec encode(const Vec& theta) const override;
    Vec decode(const Vec& z) const override;
    Mat decode_jacobian(const Vec&) const override;
    Vec latent_scale() const override;

    const Vec& mean() const { return mean_; }
    /// rank x pose_dim, orthonormal rows.
    const Mat& directions() const { return directions_; }
    const Vec& explained_variance() const { return explained_variance_; }
    int rank() const { return static_cast<int>(directions_.rows()); }
    bool rank_deficient() const { return rank() < latent_dim_; }

    void save(const std::string& path) const;
    static PcaAutoencoder load(const std::string& path);

private:
    PcaAutoencoder() = default;
    int latent_dim_ = 0;
    Vec mean_;
    Mat directions_;
    Vec explained_variance_;
};

/// Decorator that squashes the latent code through a scaled tanh before
/// decoding. Near the origin it behaves like the wrapped autoencoder;
/// far codes saturate, so decode(encode(.)) is no longer a fixed point
/// for extreme poses. Useful as a nonlinear stand-in where a linear
/// autoencoder would reconstruct its own decodes exactly.
class SaturatingAutoencoder final : public Autoencoder {
public:
    SaturatingAutoencoder(std::shared_ptr<const Autoencoder> inner, Vec kappa);

    int latent_dim() const override { return inner_->latent_dim(); }
    int pose_dim() const override { return inner_->pose_dim(); }
    Vec encode(const Vec& theta) const override { return inner_->encode(theta); }
    Vec decode(const Vec& z) const override { return inner_->decode(squash(z)); }
    Mat decode_jacobian(const Vec& z) const override;
    Vec latent_scale() const override { return inner_->latent_scale(); }

private:
    Vec squash(const Vec& z) const;
    std::shared_ptr<const Autoencoder> inner_;
    Vec kappa_;
};

}  // namespace mocap
