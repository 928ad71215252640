use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecureKeyStorage {
    /// A certified payment terminal (PCI/EMVCo approved device).
    CertifiedDevice,
    SimSe,
    EmbeddedSe,
    MicroSdSe,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dependency {
    MobileNetworkOperator,
    DeviceManufacturer,
    WalletProvider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransactionOrigin {
    Device,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointProfile {
    pub name: String,
    pub secure_key_storage: SecureKeyStorage,
    pub dependencies: BTreeSet<Dependency>,
    pub transaction_origin: TransactionOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApplicabilityStatus {
    Applicable,
    ApplicableWithDependency,
    NotApplicable,
    RuledOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReasonCode {
    /// The endpoint has nowhere to keep the initial key secret.
    NoSecureIpekStorage,
    /// The server, not the device, initiates payment, so there is no
    /// device-held key relationship to protect.
    ServerInitiatedNoDeviceKeyRelationship,
    /// Any device-side SE would tie the user to a third party.
    UndesirableDependency,
    SimSeNeedsMobileNetworkOperator,
    EmbeddedSeNeedsDeviceManufacturer,
    MicroSdSeDistributedByWalletProvider,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplicabilityVerdict {
    pub status: ApplicabilityStatus,
    pub reasons: Vec<ReasonCode>,
    pub dependency_set: BTreeSet<Dependency>,
}

impl ApplicabilityVerdict {
    /// Whether a DUKPT terminal may be provisioned for the endpoint.
    pub fn permits_dukpt(&self) -> bool {
        matches!(
            self.status,
            ApplicabilityStatus::Applicable | ApplicabilityStatus::ApplicableWithDependency
        )
    }
}

fn implied_dependency(storage: SecureKeyStorage) -> Option<(Dependency, ReasonCode)> {
    match storage {
        SecureKeyStorage::SimSe => Some((
            Dependency::MobileNetworkOperator,
            ReasonCode::SimSeNeedsMobileNetworkOperator,
        )),
        SecureKeyStorage::EmbeddedSe => Some((
            Dependency::DeviceManufacturer,
            ReasonCode::EmbeddedSeNeedsDeviceManufacturer,
        )),
        SecureKeyStorage::MicroSdSe => Some((
            Dependency::WalletProvider,
            ReasonCode::MicroSdSeDistributedByWalletProvider,
        )),
        SecureKeyStorage::CertifiedDevice | SecureKeyStorage::None => None,
    }
}

/// Rules, first match wins:
///
/// 1. server-initiated transactions: `RuledOut`
/// 2. no secure storage: `NotApplicable`
/// 3. SIM, embedded or micro-SD secure element: `ApplicableWithDependency`
///    on the operator, manufacturer or wallet provider respectively
/// 4. certified device: `Applicable`
pub fn evaluate_applicability(profile: &EndpointProfile) -> ApplicabilityVerdict {
    let mut dependency_set = profile.dependencies.clone();
    let implied = implied_dependency(profile.secure_key_storage);
    if let Some((dep, _)) = implied {
        dependency_set.insert(dep);
    }

    if profile.transaction_origin == TransactionOrigin::Server {
        let mut reasons = vec![
            ReasonCode::ServerInitiatedNoDeviceKeyRelationship,
            ReasonCode::UndesirableDependency,
        ];
        if profile.secure_key_storage == SecureKeyStorage::None {
            reasons.push(ReasonCode::NoSecureIpekStorage);
        }
        return ApplicabilityVerdict {
            status: ApplicabilityStatus::RuledOut,
            reasons,
            dependency_set,
        };
    }

    match (profile.secure_key_storage, implied) {
        (SecureKeyStorage::None, _) => ApplicabilityVerdict {
            status: ApplicabilityStatus::NotApplicable,
            reasons: vec![ReasonCode::NoSecureIpekStorage],
            dependency_set,
        },
        (_, Some((_, reason))) => ApplicabilityVerdict {
            status: ApplicabilityStatus::ApplicableWithDependency,
            reasons: vec![reason],
            dependency_set,
        },
        (_, None) => ApplicabilityVerdict {
            status: ApplicabilityStatus::Applicable,
            reasons: Vec::new(),
            dependency_set,
        },
    }
}

impl EndpointProfile {
    pub fn new(
        name: &str,
        secure_key_storage: SecureKeyStorage,
        transaction_origin: TransactionOrigin,
        dependencies: impl IntoIterator<Item = Dependency>,
    ) -> Self {
        Self {
            name: name.to_owned(),
            secure_key_storage,
            dependencies: dependencies.into_iter().collect(),
            transaction_origin,
        }
    }

    /// Parses `name,storage,origin,dep1+dep2`. The dependency field may be
    /// empty or `-`.
    pub fn parse_line(line: &str) -> Result<Self, Error> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Parse(format!(
                "profile needs name,storage,origin[,deps]: `{line}`"
            )));
        }
        if fields[0].is_empty() {
            return Err(Error::Parse("profile name is empty".into()));
        }
        let dependencies = match fields.get(3).copied() {
            None | Some("") | Some("-") => BTreeSet::new(),
            Some(deps) => deps
                .split('+')
                .map(|d| d.trim().parse())
                .collect::<Result<_, _>>()?,
        };
        Ok(Self {
            name: fields[0].to_owned(),
            secure_key_storage: fields[1].parse()?,
            transaction_origin: fields[2].parse()?,
            dependencies,
        })
    }
}

impl fmt::Display for EndpointProfile {
    /// Renders the profile in its file line format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let deps = if self.dependencies.is_empty() {
            "-".to_owned()
        } else {
            self.dependencies
                .iter()
                .map(Dependency::token)
                .collect::<Vec<_>>()
                .join("+")
        };
        write!(
            f,
            "{},{},{},{deps}",
            self.name,
            self.secure_key_storage.token(),
            self.transaction_origin.token()
        )
    }
}

/// Parses a profile file: one profile per line, `#` comments.
pub fn parse_profiles(text: &str) -> Result<Vec<EndpointProfile>, Error> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            EndpointProfile::parse_line(l).map_err(|e| Error::Parse(format!("line {n}: {e}")))
        })
        .collect()
}

/// The use cases analysed for DUKPT: a certified in-store terminal, the three
/// secure element form factors on a phone, a web browser, and a cloud wallet
/// whose payments are initiated by the server.
pub fn builtin_profiles() -> Vec<EndpointProfile> {
    use Dependency::*;
    use SecureKeyStorage as S;
    use TransactionOrigin::*;
    vec![
        EndpointProfile::new("pos", S::CertifiedDevice, Device, []),
        EndpointProfile::new("sim-se", S::SimSe, Device, [MobileNetworkOperator]),
        EndpointProfile::new("embedded-se", S::EmbeddedSe, Device, [DeviceManufacturer]),
        EndpointProfile::new("micro-sd", S::MicroSdSe, Device, [WalletProvider]),
        EndpointProfile::new("browser", S::None, Device, []),
        EndpointProfile::new(
            "cloud-wallet",
            S::SimSe,
            Server,
            [MobileNetworkOperator, DeviceManufacturer, WalletProvider],
        ),
    ]
}

pub fn builtin_profile(name: &str) -> Option<EndpointProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}

/// Plain-text verdict table, one row per profile.
pub fn render_verdict_table(rows: &[(EndpointProfile, ApplicabilityVerdict)]) -> String {
    let header = ["profile", "storage", "origin", "verdict", "reasons"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|(p, v)| {
            let reasons = if v.reasons.is_empty() {
                "-".to_owned()
            } else {
                v.reasons
                    .iter()
                    .map(|r| format!("{r:?}"))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            [
                p.name.clone(),
                format!("{:?}", p.secure_key_storage),
                format!("{:?}", p.transaction_origin),
                v.to_string(),
                reasons,
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let row: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(row.join("  ").trim_end());
        out.push('\n');
    };
    line(&header);
    for row in &body {
        line(&row.each_ref().map(String::as_str));
    }
    out
}

impl fmt::Display for ApplicabilityVerdict {
    /// `Applicable`, `ApplicableWithDependency(operator)`, `NotApplicable`,
    /// `RuledOut`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.status)?;
        if self.status == ApplicabilityStatus::ApplicableWithDependency {
            let deps: Vec<&str> = self.dependency_set.iter().map(Dependency::token).collect();
            write!(f, "({})", deps.join("+"))?;
        }
        Ok(())
    }
}

impl SecureKeyStorage {
    fn token(&self) -> &'static str {
        match self {
            SecureKeyStorage::CertifiedDevice => "certified",
            SecureKeyStorage::SimSe => "sim",
            SecureKeyStorage::EmbeddedSe => "embedded",
            SecureKeyStorage::MicroSdSe => "microsd",
            SecureKeyStorage::None => "none",
        }
    }
}

impl Dependency {
    fn token(&self) -> &'static str {
        match self {
            Dependency::MobileNetworkOperator => "operator",
            Dependency::DeviceManufacturer => "manufacturer",
            Dependency::WalletProvider => "wallet",
        }
    }
}

impl TransactionOrigin {
    fn token(&self) -> &'static str {
        match self {
            TransactionOrigin::Device => "device",
            TransactionOrigin::Server => "server",
        }
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for SecureKeyStorage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match normalize(s).as_str() {
            "certified" | "certifieddevice" => SecureKeyStorage::CertifiedDevice,
            "sim" | "simse" | "uicc" => SecureKeyStorage::SimSe,
            "embedded" | "embeddedse" => SecureKeyStorage::EmbeddedSe,
            "microsd" | "microsdse" => SecureKeyStorage::MicroSdSe,
            "none" => SecureKeyStorage::None,
            _ => return Err(Error::Parse(format!("unknown storage `{s}`"))),
        })
    }
}

impl FromStr for Dependency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match normalize(s).as_str() {
            "operator" | "mno" | "mobilenetworkoperator" => Dependency::MobileNetworkOperator,
            "manufacturer" | "devicemanufacturer" => Dependency::DeviceManufacturer,
            "wallet" | "walletprovider" => Dependency::WalletProvider,
            _ => return Err(Error::Parse(format!("unknown dependency `{s}`"))),
        })
    }
}

impl FromStr for TransactionOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match normalize(s).as_str() {
            "device" => TransactionOrigin::Device,
            "server" => TransactionOrigin::Server,
            _ => return Err(Error::Parse(format!("unknown origin `{s}`"))),
        })
    }
}
