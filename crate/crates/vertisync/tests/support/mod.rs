pub mod oracle;
pub mod periodic;
